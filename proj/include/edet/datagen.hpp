#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "edet/common.hpp"
#include "edet/dataset.hpp"

namespace edet::data {

struct BlobParams {
  std::size_t class_count = 10;
  std::size_t dim = 64;
  std::size_t per_class = 1000;
  double spread = 0.05;
  std::uint64_t seed = 1;
  /// 0: isotropic clusters. r > 0: each class varies along its own random
  /// r-dimensional subspace, x = center + spread * B_k u with u ~ N(0, I_r)
  /// and B_k entries N(0, 1/r), so every coordinate still has std `spread`.
  std::size_t latent_dim = 0;
};

/// Class centers drawn uniformly from [0.2, 0.8]^dim.
std::vector<Vec> blob_centers(std::size_t class_count, std::size_t dim, std::uint64_t seed);

/// Per-class dim x latent_dim row-major bases (empty when latent_dim is 0).
std::vector<Vec> blob_bases(std::size_t class_count, std::size_t dim, std::size_t latent_dim,
                            std::uint64_t seed);

/// Gaussian clusters around blob_centers(), clamped to [0, 1].
/// Samples are interleaved by class: index i has label i % class_count.
LabeledDataset gen_blobs(const BlobParams& params);

/// Empirical per-class input means.
std::vector<Vec> class_means(const LabeledDataset& data);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Stratified partition of [0, size) into train/val/test with the given
/// fractions (test receives the remainder). Each list is ascending.
SplitIndices split_indices(const LabeledDataset& data, double train_fraction,
                           double val_fraction, std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices,
                      Split split);

enum class OodMode { shifted_mean, scaled_variance, structured };

std::string_view to_string(OodMode mode);
OodMode parse_ood_mode(std::string_view text);

struct OodParams {
  std::size_t dim = 64;
  std::size_t n = 0;
  OodMode mode = OodMode::structured;
  std::uint64_t seed = 1;
  /// In-distribution class centers that the generator must stay away from.
  std::vector<Vec> reference_centers;
  /// shifted-mean: minimum L2 distance between the OoD center and every
  /// reference center.
  double margin = 1.0;
  /// shifted-mean: per-coordinate std around the OoD center.
  double spread = 0.05;
  /// scaled-variance: per-coordinate std around a random reference center.
  double wide_spread = 0.3;
};

struct OodDataset {
  std::vector<Vec> samples;
  std::string source;
};

/// Inputs in [0,1]^dim from a distribution distinct from the reference:
///  shifted-mean    one Gaussian cluster whose center is rejection-sampled
///                  from [0.1, 0.9]^dim until it is `margin` away from every
///                  reference center, then pushed further out if clamping
///                  pulled the empirical mean inside the margin
///  scaled-variance reference centers with `wide_spread` noise
///  structured      uniform noise on the unit cube
OodDataset gen_ood(const OodParams& params);

/// One CIFAR-10 binary batch: 3073-byte records of label byte + 3072 pixel
/// bytes (R, G, B planes of 32x32, row-major), pixels divided by 255.
LabeledDataset load_cifar10_binary(const std::filesystem::path& path, Split split);

struct CifarSplits {
  LabeledDataset train;
  LabeledDataset test;
};

/// data_batch_1..5.bin and test_batch.bin from the extracted binary archive.
CifarSplits load_cifar10_dir(const std::filesystem::path& dir);

}  // namespace edet::data
