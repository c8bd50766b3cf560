#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "edet/common.hpp"
#include "edet/feature.hpp"

namespace edet::svm {

/// Per-feature affine map to zero mean / unit variance. Features whose
/// training variance is (numerically) zero keep scale 1.
struct Standardizer {
  Vec mean;
  Vec scale;

  static Standardizer fit(std::span<const Vec> rows);
  Vec apply(std::span<const double> x) const;
  std::size_t dim() const { return mean.size(); }

  bool operator==(const Standardizer&) const = default;
};

enum class Solver {
  /// Dual coordinate descent; converges in tens of epochs at small lambda.
  dual_cd,
  /// Projected subgradient steps 1 / (lambda (t + 1/lambda)).
  pegasos,
};

std::string_view to_string(Solver solver);
Solver parse_solver(std::string_view text);

struct SvmParams {
  double lambda = 1e-4;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  Solver solver = Solver::dual_cd;
};

struct SvmModel {
  Vec weights;
  double bias = 0.0;
  Standardizer standardizer;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  /// Best objective seen so far, checkpointed at the start and after every
  /// epoch; non-increasing by construction.
  Vec objective_trace;

  std::size_t dim() const { return weights.size(); }
  bool operator==(const SvmModel&) const = default;
};

/// lambda/2 ||w||^2 + mean_i max(0, 1 - y_i (w . z_i + b)), y in {-1, +1},
/// z already standardized.
double objective(std::span<const double> weights, double bias, std::span<const Vec> z,
                 std::span<const int> labels01, double lambda);

/// Exact minimiser of the mean hinge loss over the bias for fixed weights;
/// the midpoint of the optimal interval.
double optimal_bias(std::span<const double> weights, std::span<const Vec> z,
                    std::span<const int> labels01);

/// Minimises objective() on standardized features with `params.epochs` seeded,
/// shuffled passes of the chosen solver. At every epoch end the iterate (and
/// for Pegasos also the epoch average, with projection onto the
/// 1/sqrt(lambda) ball) is scored with its exact optimal bias; the best model
/// seen is returned.
///
/// The standardizer is fit on `rows` unless `standardizer` is supplied.
/// Throws InputError if only one label is present or lambda <= 0.
SvmModel fit(std::span<const Vec> rows, std::span<const int> labels01, const SvmParams& params,
             const Standardizer* standardizer = nullptr);

/// Fit on the subset `train_idx` of a detection dataset only.
SvmModel fit(const feature::DetectionDataset& data, std::span<const std::size_t> train_idx,
             const SvmParams& params, const Standardizer* standardizer = nullptr);

/// w . standardize(x) + b; positive is the erroneous side.
double decision(const SvmModel& model, std::span<const double> x);

/// 1 if decision > 0, else 0.
int predict_label(const SvmModel& model, std::span<const double> x);

}  // namespace edet::svm
