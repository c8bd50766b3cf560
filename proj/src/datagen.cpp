#include "edet/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::data {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

constexpr std::size_t kCifarPixels = 32 * 32 * 3;
constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

}  // namespace

std::vector<Vec> blob_centers(std::size_t class_count, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "blob-centers"));
  std::vector<Vec> centers(class_count, Vec(dim));
  for (auto& c : centers) {
    for (double& v : c) v = rng.uniform(0.2, 0.8);
  }
  return centers;
}

std::vector<Vec> blob_bases(std::size_t class_count, std::size_t dim, std::size_t latent_dim,
                            std::uint64_t seed) {
  if (latent_dim == 0) return {};
  Rng rng(derive_seed(seed, "blob-bases"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  std::vector<Vec> bases(class_count, Vec(dim * latent_dim));
  for (auto& b : bases) {
    for (double& v : b) v = scale * rng.normal();
  }
  return bases;
}

LabeledDataset gen_blobs(const BlobParams& p) {
  if (p.class_count < 2) throw InputError("blob generator needs at least 2 classes");
  if (p.dim < 2) throw InputError("blob generator needs dim >= 2");
  if (p.per_class == 0) throw InputError("blob generator needs n per class >= 1");
  if (!(p.spread >= 0.0)) throw InputError("blob spread must be non-negative");

  const auto centers = blob_centers(p.class_count, p.dim, p.seed);
  const auto bases = blob_bases(p.class_count, p.dim, p.latent_dim, p.seed);
  Rng rng(derive_seed(p.seed, "blob-samples"));
  Vec u(p.latent_dim);
  LabeledDataset out;
  out.class_count = p.class_count;
  out.seed = p.seed;
  out.samples.reserve(p.class_count * p.per_class);
  for (std::size_t i = 0; i < p.per_class; ++i) {
    for (std::size_t k = 0; k < p.class_count; ++k) {
      Sample s;
      s.label = k;
      s.input.resize(p.dim);
      if (p.latent_dim == 0) {
        for (std::size_t d = 0; d < p.dim; ++d) {
          s.input[d] = clamp01(centers[k][d] + p.spread * rng.normal());
        }
      } else {
        for (double& v : u) v = rng.normal();
        for (std::size_t d = 0; d < p.dim; ++d) {
          const double offset = dot(std::span<const double>(bases[k]).subspan(d * p.latent_dim, p.latent_dim), u);
          s.input[d] = clamp01(centers[k][d] + p.spread * offset);
        }
      }
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Vec> class_means(const LabeledDataset& data) {
  std::vector<Vec> means(data.class_count, Vec(data.input_dim(), 0.0));
  std::vector<std::size_t> counts(data.class_count, 0);
  for (const Sample& s : data.samples) {
    for (std::size_t d = 0; d < s.input.size(); ++d) means[s.label][d] += s.input[d];
    ++counts[s.label];
  }
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (counts[k] == 0) continue;
    for (double& v : means[k]) v /= static_cast<double>(counts[k]);
  }
  return means;
}

SplitIndices split_indices(const LabeledDataset& data, double train_fraction,
                           double val_fraction, std::uint64_t seed) {
  if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    throw InputError("split fractions must be non-negative and sum to at most 1");
  }
  std::vector<std::vector<std::size_t>> by_class(data.class_count);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class.at(data.samples[i].label).push_back(i);
  }
  Rng rng(derive_seed(seed, "split"));
  SplitIndices out;
  for (auto& idx : by_class) {
    shuffle(idx, rng);
    const auto n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::floor(n * train_fraction + 0.5));
    const auto n_val = std::min(idx.size() - n_train,
                                static_cast<std::size_t>(std::floor(n * val_fraction + 0.5)));
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
    out.val.insert(out.val.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
    out.test.insert(out.test.end(), idx.begin() + n_train + n_val, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices,
                      Split split) {
  LabeledDataset out;
  out.class_count = data.class_count;
  out.seed = data.seed;
  out.split = split;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(data.samples.at(i));
  return out;
}

std::string_view to_string(OodMode mode) {
  switch (mode) {
    case OodMode::shifted_mean: return "shifted-mean";
    case OodMode::scaled_variance: return "scaled-variance";
    case OodMode::structured: return "structured";
  }
  return "structured";
}

OodMode parse_ood_mode(std::string_view text) {
  if (text == "shifted-mean") return OodMode::shifted_mean;
  if (text == "scaled-variance") return OodMode::scaled_variance;
  if (text == "structured") return OodMode::structured;
  throw InputError("unknown OoD mode '" + std::string(text) + "'");
}

OodDataset gen_ood(const OodParams& p) {
  for (const Vec& c : p.reference_centers) {
    if (c.size() != p.dim) {
      throw InputError("OoD dimension does not match the in-distribution dimension");
    }
  }
  OodDataset out;
  out.source = std::string(to_string(p.mode));
  if (p.n == 0) return out;

  Rng rng(derive_seed(p.seed, out.source));
  out.samples.reserve(p.n);
  switch (p.mode) {
    case OodMode::structured: {
      for (std::size_t i = 0; i < p.n; ++i) {
        Vec x(p.dim);
        for (double& v : x) v = rng.uniform();
        out.samples.push_back(std::move(x));
      }
      break;
    }
    case OodMode::scaled_variance: {
      if (p.reference_centers.empty()) {
        throw InputError("scaled-variance OoD needs reference centers");
      }
      for (std::size_t i = 0; i < p.n; ++i) {
        const Vec& c = p.reference_centers[rng.index(p.reference_centers.size())];
        Vec x(p.dim);
        for (std::size_t d = 0; d < p.dim; ++d) x[d] = clamp01(c[d] + p.wide_spread * rng.normal());
        out.samples.push_back(std::move(x));
      }
      break;
    }
    case OodMode::shifted_mean: {
      constexpr int kAttempts = 1000;
      for (int attempt = 0; attempt < kAttempts; ++attempt) {
        Vec center(p.dim);
        for (double& v : center) v = rng.uniform(0.1, 0.9);
        bool far = true;
        for (const Vec& ref : p.reference_centers) far = far && distance(center, ref) >= p.margin;
        if (!far) continue;
        std::vector<Vec> xs;
        xs.reserve(p.n);
        Vec mean(p.dim, 0.0);
        for (std::size_t i = 0; i < p.n; ++i) {
          Vec x(p.dim);
          for (std::size_t d = 0; d < p.dim; ++d) {
            x[d] = clamp01(center[d] + p.spread * rng.normal());
            mean[d] += x[d];
          }
          xs.push_back(std::move(x));
        }
        for (double& v : mean) v /= static_cast<double>(p.n);
        bool empirical_far = true;
        for (const Vec& ref : p.reference_centers) {
          empirical_far = empirical_far && distance(mean, ref) >= p.margin;
        }
        if (!empirical_far) continue;
        out.samples = std::move(xs);
        return out;
      }
      throw ConfigError("could not place a shifted-mean OoD cluster at the requested margin");
    }
  }
  return out;
}

LabeledDataset load_cifar10_binary(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CIFAR-10 batch " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() % kCifarRecord != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kCifarRecord;
    throw FormatError("truncated CIFAR-10 record at byte offset " + std::to_string(offset) +
                      " in " + path.string() + " (file length " +
                      std::to_string(bytes.size()) + " is not a multiple of 3073)");
  }
  LabeledDataset out;
  out.class_count = 10;
  out.split = split;
  const std::size_t n = bytes.size() / kCifarRecord;
  out.samples.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t offset = r * kCifarRecord;
    const unsigned label = bytes[offset];
    if (label > 9) {
      throw FormatError("CIFAR-10 label byte " + std::to_string(label) + " at byte offset " +
                        std::to_string(offset) + " in " + path.string());
    }
    Sample s;
    s.label = label;
    s.input.resize(kCifarPixels);
    for (std::size_t j = 0; j < kCifarPixels; ++j) {
      s.input[j] = static_cast<double>(bytes[offset + 1 + j]) / 255.0;
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

CifarSplits load_cifar10_dir(const std::filesystem::path& dir) {
  CifarSplits out;
  out.train.class_count = 10;
  out.train.split = Split::train;
  for (int i = 1; i <= 5; ++i) {
    auto batch = load_cifar10_binary(dir / ("data_batch_" + std::to_string(i) + ".bin"),
                                     Split::train);
    for (auto& s : batch.samples) out.train.samples.push_back(std::move(s));
  }
  out.test = load_cifar10_binary(dir / "test_batch.bin", Split::test);
  return out;
}

}  // namespace edet::data
