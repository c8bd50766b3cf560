#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace edet {

/// Base class for every error raised by the toolkit. `kind()` is the stable
/// error-class name the CLI prints and maps to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  std::string_view kind() const noexcept { return kind_; }

 private:
  std::string_view kind_;
};

#define EDET_DEFINE_ERROR(Name, tag)                                 \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  }

EDET_DEFINE_ERROR(ConfigError, "config-error");
EDET_DEFINE_ERROR(InputError, "input-error");
EDET_DEFINE_ERROR(FormatError, "format-error");
EDET_DEFINE_ERROR(IoError, "io-error");
EDET_DEFINE_ERROR(UnsupportedVersionError, "unsupported-version");
EDET_DEFINE_ERROR(ChecksumError, "checksum-mismatch");
EDET_DEFINE_ERROR(KindMismatchError, "kind-mismatch");
// Attack launched from a sample the classifier already gets wrong.
EDET_DEFINE_ERROR(PreconditionError, "precondition-violated");
EDET_DEFINE_ERROR(UndefinedMetricError, "undefined-metric");

#undef EDET_DEFINE_ERROR

}  // namespace edet
