#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edet/dataset.hpp"
#include "edet/feature.hpp"
#include "edet/nnet.hpp"
#include "edet/svm.hpp"

namespace edet::io {

// Container layout (all integers little-endian, floats IEEE-754 binary64):
//
//   offset  size  field
//   0       8     magic "EDETART\0"
//   8       4     format version (u32, currently 1)
//   12      4     artifact kind (u32, see ArtifactKind)
//   16      8     master seed (u64)
//   24      8     config hash (u64)
//   32      8     metadata length M (u64)
//   40      M     metadata, UTF-8 JSON text
//   40+M    8     payload length N (u64)
//   48+M    N     payload, layout per kind (docs/FORMATS.md)
//   48+M+N  8     FNV-1a 64 of bytes [0, 48+M+N)

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr char kMagic[8] = {'E', 'D', 'E', 'T', 'A', 'R', 'T', '\0'};

enum class ArtifactKind : std::uint32_t {
  classifier = 1,
  svm_model = 2,
  detection_dataset = 3,
  labeled_dataset = 4,
  sample_pool = 5,
};

std::string_view to_string(ArtifactKind kind);

struct ArtifactHeader {
  std::uint32_t version = kFormatVersion;
  ArtifactKind kind = ArtifactKind::classifier;
  std::uint64_t master_seed = 0;
  std::uint64_t config_hash = 0;
  std::string metadata;
};

/// What the caller supplies when saving; version and kind are filled in.
struct ArtifactInfo {
  std::uint64_t master_seed = 0;
  std::uint64_t config_hash = 0;
  std::string metadata = "{}";
};

template <typename T>
struct Loaded {
  T value;
  ArtifactHeader header;
};

/// Inputs of one erroneous or correct pool, persisted between CLI stages.
struct SamplePool {
  std::string name;
  std::vector<Sample> samples;
  std::vector<std::uint64_t> source_ids;

  bool operator==(const SamplePool&) const = default;
};

// Writes go to "<path>.tmp" and are renamed into place. Saves throw IoError
// naming the path; loads throw IoError, FormatError (bad magic, truncated or
// overlong file), UnsupportedVersionError, ChecksumError or
// KindMismatchError.

void save_classifier(const nnet::Classifier& clf, const std::filesystem::path& path,
                     const ArtifactInfo& info = {});
Loaded<nnet::Classifier> load_classifier(const std::filesystem::path& path);

void save_svm(const svm::SvmModel& model, const std::filesystem::path& path,
              const ArtifactInfo& info = {});
Loaded<svm::SvmModel> load_svm(const std::filesystem::path& path);

void save_detection_dataset(const feature::DetectionDataset& data,
                            const std::filesystem::path& path, const ArtifactInfo& info = {});
Loaded<feature::DetectionDataset> load_detection_dataset(const std::filesystem::path& path);

void save_labeled_dataset(const LabeledDataset& data, const std::filesystem::path& path,
                          const ArtifactInfo& info = {});
Loaded<LabeledDataset> load_labeled_dataset(const std::filesystem::path& path);

void save_sample_pool(const SamplePool& pool, const std::filesystem::path& path,
                      const ArtifactInfo& info = {});
Loaded<SamplePool> load_sample_pool(const std::filesystem::path& path);

/// Header only; validates magic, version, length and checksum.
ArtifactHeader read_header(const std::filesystem::path& path);

/// Writes `text` to `path` via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace edet::io
