#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "edet/common.hpp"
#include "edet/dataset.hpp"
#include "edet/nnet.hpp"

namespace edet::corrupt {

enum class Kind { gaussian_noise, shot_noise, blur, pixelate, contrast, brightness };

inline constexpr std::array<Kind, 6> kAllKinds = {Kind::gaussian_noise, Kind::shot_noise,
                                                  Kind::blur,           Kind::pixelate,
                                                  Kind::contrast,       Kind::brightness};

std::string_view to_string(Kind kind);
/// Throws InputError for names outside the six supported kinds.
Kind parse_kind(std::string_view text);
bool needs_geometry(Kind kind);

struct CorruptionSpec {
  Kind kind = Kind::gaussian_noise;
  int severity = 1;  // 1..5
  std::uint64_t seed = 0;
};

/// Channel-planar image layout: index = c*height*width + y*width + x.
struct Geometry {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;

  std::size_t size() const { return width * height * channels; }
};

/// Per-kind parameter for severities 1..5.
///   gaussian-noise  additive N(0, sigma^2) noise, sigma
///   shot-noise      Poisson(x * rate) / rate, rate (lower is noisier)
///   blur            separable Gaussian kernel sigma in pixels, radius ceil(3 sigma)
///   pixelate        downscale factor in (0, 1]; cells per side = round(side * factor)
///   contrast        factor c in (x - image mean) * c + image mean
///   brightness      additive offset
struct SeverityTable {
  std::map<Kind, std::array<double, 5>> params;

  static SeverityTable defaults();
  double param(Kind kind, int severity) const;
};

/// Output is clamped to [0, 1] and deterministic given spec.seed. Throws
/// InputError for a severity outside 1..5, a missing geometry for blur or
/// pixelate, or a geometry whose size differs from the input length.
Vec apply_corruption(std::span<const double> input, const CorruptionSpec& spec,
                     const std::optional<Geometry>& geometry,
                     const SeverityTable& table = SeverityTable::defaults());

struct CorruptedSample {
  Sample sample;
  CorruptionSpec spec;
  std::size_t source_index = 0;
};

struct CorruptedPool {
  std::vector<CorruptedSample> wrong;
  std::vector<CorruptedSample> right;
};

/// Applies every (kind, severity) combination to every clean sample and sorts
/// the results by whether the classifier still gets them right. Output order
/// is (sample, kind, severity) lexicographic regardless of execution mode.
/// The seed of each corruption is derive_seed(seed, kind, sample/severity).
CorruptedPool build_corrupted_pool(const nnet::Classifier& clf, const LabeledDataset& clean,
                                   std::span<const Kind> kinds, std::span<const int> severities,
                                   std::uint64_t seed, const std::optional<Geometry>& geometry,
                                   const SeverityTable& table = SeverityTable::defaults(),
                                   Execution exec = Execution::parallel);

}  // namespace edet::corrupt
