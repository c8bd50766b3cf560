#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "edet/common.hpp"

namespace edet {

/// One classifier input. Components live in [0, 1]; label < class count.
struct Sample {
  Vec input;
  std::size_t label = 0;

  bool operator==(const Sample&) const = default;
};

enum class Split { train, val, test, all };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct LabeledDataset {
  std::vector<Sample> samples;
  std::size_t class_count = 0;
  Split split = Split::all;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t input_dim() const { return samples.empty() ? 0 : samples.front().input.size(); }

  bool operator==(const LabeledDataset&) const = default;
};

}  // namespace edet
