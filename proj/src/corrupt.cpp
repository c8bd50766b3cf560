#include "edet/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::corrupt {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// One-dimensional Gaussian pass along `axis` (0 = x, 1 = y) with replicated
// borders.
Vec blur_pass(std::span<const double> img, const Geometry& g, std::span<const double> kernel,
              int radius, int axis) {
  Vec out(img.size(), 0.0);
  const auto w = static_cast<int>(g.width);
  const auto h = static_cast<int>(g.height);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = img.data() + c * g.width * g.height;
    double* dst = out.data() + c * g.width * g.height;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = axis == 0 ? std::clamp(x + k, 0, w - 1) : x;
          const int yy = axis == 1 ? std::clamp(y + k, 0, h - 1) : y;
          s += kernel[static_cast<std::size_t>(k + radius)] * plane[yy * w + xx];
        }
        dst[y * w + x] = s;
      }
    }
  }
  return out;
}

Vec gaussian_blur(std::span<const double> img, const Geometry& g, double sigma) {
  if (sigma <= 0.0) return Vec(img.begin(), img.end());
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Vec kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * (k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;
  return blur_pass(blur_pass(img, g, kernel, radius, 0), g, kernel, radius, 1);
}

// Area-average onto an rx x ry grid of near-equal cells, then nearest upsample.
Vec pixelate(std::span<const double> img, const Geometry& g, double factor) {
  auto cells = [factor](std::size_t n) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(n * factor)), 1, n);
  };
  const std::size_t rx = cells(g.width);
  const std::size_t ry = cells(g.height);
  Vec out(img.begin(), img.end());
  for (std::size_t c = 0; c < g.channels; ++c) {
    const std::size_t base = c * g.width * g.height;
    for (std::size_t cy = 0; cy < ry; ++cy) {
      const std::size_t y0 = cy * g.height / ry, y1 = (cy + 1) * g.height / ry;
      for (std::size_t cx = 0; cx < rx; ++cx) {
        const std::size_t x0 = cx * g.width / rx, x1 = (cx + 1) * g.width / rx;
        double s = 0.0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) s += img[base + y * g.width + x];
        const double mean = s / static_cast<double>((y1 - y0) * (x1 - x0));
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) out[base + y * g.width + x] = mean;
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::gaussian_noise: return "gaussian-noise";
    case Kind::shot_noise: return "shot-noise";
    case Kind::blur: return "blur";
    case Kind::pixelate: return "pixelate";
    case Kind::contrast: return "contrast";
    case Kind::brightness: return "brightness";
  }
  return "gaussian-noise";
}

Kind parse_kind(std::string_view text) {
  for (Kind k : kAllKinds) {
    if (to_string(k) == text) return k;
  }
  throw InputError("unknown corruption kind '" + std::string(text) + "'");
}

bool needs_geometry(Kind kind) { return kind == Kind::blur || kind == Kind::pixelate; }

SeverityTable SeverityTable::defaults() {
  SeverityTable t;
  t.params[Kind::gaussian_noise] = {0.04, 0.08, 0.12, 0.18, 0.26};
  t.params[Kind::shot_noise] = {60.0, 25.0, 12.0, 5.0, 3.0};
  t.params[Kind::blur] = {0.5, 0.75, 1.0, 1.5, 2.0};
  t.params[Kind::pixelate] = {0.75, 0.6, 0.5, 0.4, 0.25};
  t.params[Kind::contrast] = {0.6, 0.45, 0.3, 0.2, 0.1};
  t.params[Kind::brightness] = {0.1, 0.2, 0.3, 0.4, 0.5};
  return t;
}

double SeverityTable::param(Kind kind, int severity) const {
  if (severity < 1 || severity > 5) {
    throw InputError("severity " + std::to_string(severity) + " outside 1..5");
  }
  const auto it = params.find(kind);
  if (it == params.end()) {
    throw InputError("no severity table for " + std::string(to_string(kind)));
  }
  return it->second[static_cast<std::size_t>(severity - 1)];
}

Vec apply_corruption(std::span<const double> input, const CorruptionSpec& spec,
                     const std::optional<Geometry>& geometry, const SeverityTable& table) {
  const double p = table.param(spec.kind, spec.severity);
  if (geometry && geometry->size() != input.size()) {
    throw InputError("geometry " + std::to_string(geometry->width) + "x" +
                     std::to_string(geometry->height) + "x" +
                     std::to_string(geometry->channels) + " does not match input length " +
                     std::to_string(input.size()));
  }
  if (needs_geometry(spec.kind) && !geometry) {
    throw InputError(std::string(to_string(spec.kind)) + " requires image geometry");
  }

  Rng rng(spec.seed);
  Vec out(input.begin(), input.end());
  switch (spec.kind) {
    case Kind::gaussian_noise:
      if (p == 0.0) return out;
      for (double& v : out) v += p * rng.normal();
      break;
    case Kind::shot_noise:
      for (double& v : out) v = static_cast<double>(rng.poisson(v * p)) / p;
      break;
    case Kind::blur:
      out = gaussian_blur(input, *geometry, p);
      break;
    case Kind::pixelate:
      out = pixelate(input, *geometry, p);
      break;
    case Kind::contrast: {
      double mean = 0.0;
      for (double v : input) mean += v;
      mean /= static_cast<double>(std::max<std::size_t>(1, input.size()));
      for (double& v : out) v = (v - mean) * p + mean;
      break;
    }
    case Kind::brightness:
      for (double& v : out) v += p;
      break;
  }
  for (double& v : out) v = clamp01(v);
  return out;
}

CorruptedPool build_corrupted_pool(const nnet::Classifier& clf, const LabeledDataset& clean,
                                   std::span<const Kind> kinds, std::span<const int> severities,
                                   std::uint64_t seed, const std::optional<Geometry>& geometry,
                                   const SeverityTable& table, Execution exec) {
  const std::size_t per_sample = kinds.size() * severities.size();
  const std::size_t total = clean.size() * per_sample;
  std::vector<CorruptedSample> slots(total);
  std::vector<char> correct(total, 0);

  auto work = [&](std::size_t job) {
    const std::size_t i = job / per_sample;
    const std::size_t r = job % per_sample;
    const Kind kind = kinds[r / severities.size()];
    const int severity = severities[r % severities.size()];
    CorruptedSample cs;
    cs.source_index = i;
    cs.spec = {kind, severity,
               derive_seed(seed, to_string(kind), i * 8 + static_cast<std::size_t>(severity))};
    cs.sample.label = clean.samples[i].label;
    cs.sample.input = apply_corruption(clean.samples[i].input, cs.spec, geometry, table);
    correct[job] = nnet::predict(clf, cs.sample.input) == cs.sample.label;
    slots[job] = std::move(cs);
  };

  if (exec == Execution::parallel) {
    // Exceptions must not escape the parallel region; validate up front.
    for (Kind k : kinds) {
      for (int s : severities) (void)table.param(k, s);
      if (needs_geometry(k) && !geometry) {
        throw InputError(std::string(to_string(k)) + " requires image geometry");
      }
    }
    if (geometry && clean.size() > 0 && geometry->size() != clean.input_dim()) {
      throw InputError("geometry does not match input length");
    }
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t job = 0; job < total; ++job) work(job);
  } else {
    for (std::size_t job = 0; job < total; ++job) work(job);
  }

  CorruptedPool pool;
  for (std::size_t job = 0; job < total; ++job) {
    (correct[job] ? pool.right : pool.wrong).push_back(std::move(slots[job]));
  }
  return pool;
}

}  // namespace edet::corrupt
