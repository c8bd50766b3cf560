#include "edet/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::svm {

namespace {

double sign_label(int label01) { return label01 == 1 ? 1.0 : -1.0; }

struct Candidate {
  Vec weights;
  double bias = 0.0;
  double objective = 0.0;
};

template <typename Consider, typename Checkpoint>
void run_pegasos(std::span<const Vec> z, std::span<const int> labels01, const SvmParams& params,
                 Consider&& consider, Checkpoint&& checkpoint) {
  const std::size_t n = z.size();
  const std::size_t d = z.front().size();
  const double lambda = params.lambda;
  const double radius = 1.0 / std::sqrt(lambda);
  Vec w(d, 0.0);
  double b = 0.0;  // regularized alongside w during the updates
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(params.seed, "svm-shuffle"));
  std::size_t t = 0;
  // Offsetting t by 1/lambda caps the first step near 1 instead of 1/lambda.
  const double t0 = std::ceil(1.0 / lambda);

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle(order, rng);
    Vec avg(d, 0.0);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * (static_cast<double>(t) + t0));
      const double y = sign_label(labels01[i]);
      const double margin = y * (dot(w, z[i]) + b);
      const double shrink = 1.0 - eta * lambda;
      for (double& v : w) v *= shrink;
      b *= shrink;
      if (margin < 1.0) {
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * y * z[i][j];
        b += eta * y;
      }
      const double norm = std::sqrt(dot(w, w) + b * b);
      if (norm > radius) {
        const double f = radius / norm;
        for (double& v : w) v *= f;
        b *= f;
      }
      for (std::size_t j = 0; j < d; ++j) avg[j] += w[j];
    }
    for (double& v : avg) v /= static_cast<double>(n);
    consider(w);
    consider(avg);
    checkpoint();
  }
}

// Dual coordinate descent on min_w 1/2 |w|^2 + C sum_i hinge_i with
// C = 1 / (lambda n), which has the same minimiser as the mean-hinge form.
// The bias rides along as a constant feature during the sweeps and is
// replaced by its exact optimum whenever an iterate is scored.
template <typename Consider, typename Checkpoint>
void run_dual_cd(std::span<const Vec> z, std::span<const int> labels01, const SvmParams& params,
                 Consider&& consider, Checkpoint&& checkpoint) {
  const std::size_t n = z.size();
  const std::size_t d = z.front().size();
  const double c = 1.0 / (params.lambda * static_cast<double>(n));
  Vec w(d, 0.0);
  double b = 0.0;
  Vec alpha(n, 0.0);
  Vec q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = dot(z[i], z[i]) + 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(params.seed, "svm-shuffle"));

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle(order, rng);
    double max_pg = 0.0;
    for (std::size_t i : order) {
      const double y = sign_label(labels01[i]);
      const double g = y * (dot(w, z[i]) + b) - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
      if (alpha[i] >= c) pg = std::max(g, 0.0);
      max_pg = std::max(max_pg, std::abs(pg));
      if (pg == 0.0) continue;
      const double next = std::clamp(alpha[i] - g / q[i], 0.0, c);
      const double delta = (next - alpha[i]) * y;
      alpha[i] = next;
      for (std::size_t j = 0; j < d; ++j) w[j] += delta * z[i][j];
      b += delta;
    }
    consider(w);
    checkpoint();
    if (max_pg < 1e-6) {
      // Converged: later epochs would not move, so repeat the checkpoint.
      for (std::size_t rest = epoch + 1; rest < params.epochs; ++rest) checkpoint();
      break;
    }
  }
}

}  // namespace

std::string_view to_string(Solver solver) {
  return solver == Solver::pegasos ? "pegasos" : "dual-cd";
}

Solver parse_solver(std::string_view text) {
  if (text == "dual-cd") return Solver::dual_cd;
  if (text == "pegasos") return Solver::pegasos;
  throw InputError("unknown SVM solver '" + std::string(text) + "'");
}

Standardizer Standardizer::fit(std::span<const Vec> rows) {
  Standardizer s;
  if (rows.empty()) return s;
  const std::size_t d = rows.front().size();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const Vec& r : rows) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  }
  const auto n = static_cast<double>(rows.size());
  for (double& m : s.mean) m /= n;
  for (const Vec& r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - s.mean[j];
      s.scale[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(s.scale[j] / n);
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
  }
  return s;
}

Vec Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw InputError("feature dimension does not match standardizer");
  Vec z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / scale[j];
  return z;
}

double objective(std::span<const double> weights, double bias, std::span<const Vec> z,
                 std::span<const int> labels01, double lambda) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double m = sign_label(labels01[i]) * (dot(weights, z[i]) + bias);
    hinge += std::max(0.0, 1.0 - m);
  }
  return 0.5 * lambda * dot(weights, weights) + hinge / static_cast<double>(z.size());
}

double optimal_bias(std::span<const double> weights, std::span<const Vec> z,
                    std::span<const int> labels01) {
  // Term i has its kink at b_i = y_i - w.z_i; the slope of the summed hinge
  // starts at -n_pos and rises by one at every kink, so it is zero between
  // the n_pos-th and (n_pos+1)-th smallest kinks.
  Vec kinks(z.size());
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double y = sign_label(labels01[i]);
    kinks[i] = y - dot(weights, z[i]);
    n_pos += labels01[i] == 1;
  }
  if (n_pos == 0 || n_pos == z.size()) return 0.0;
  std::sort(kinks.begin(), kinks.end());
  return 0.5 * (kinks[n_pos - 1] + kinks[n_pos]);
}

SvmModel fit(std::span<const Vec> rows, std::span<const int> labels01, const SvmParams& params,
             const Standardizer* standardizer) {
  if (!(params.lambda > 0.0)) throw InputError("SVM regularization must be > 0");
  if (rows.size() != labels01.size()) throw InputError("feature/label count mismatch");
  const std::size_t n_pos = static_cast<std::size_t>(std::count(labels01.begin(), labels01.end(), 1));
  if (n_pos == 0 || n_pos == rows.size()) {
    throw InputError("SVM training data must contain both labels");
  }

  SvmModel model;
  model.lambda = params.lambda;
  model.seed = params.seed;
  model.standardizer = standardizer ? *standardizer : Standardizer::fit(rows);

  std::vector<Vec> z;
  z.reserve(rows.size());
  for (const Vec& r : rows) z.push_back(model.standardizer.apply(r));
  const std::size_t d = model.standardizer.dim();

  Candidate best{Vec(d, 0.0), 0.0, 0.0};
  best.objective = objective(best.weights, best.bias, z, labels01, params.lambda);
  model.objective_trace.push_back(best.objective);
  auto consider = [&](const Vec& w) {
    const double b = optimal_bias(w, z, labels01);
    const double obj = objective(w, b, z, labels01, params.lambda);
    if (obj < best.objective) best = {w, b, obj};
  };
  auto checkpoint = [&] { model.objective_trace.push_back(best.objective); };

  if (params.solver == Solver::pegasos) {
    run_pegasos(z, labels01, params, consider, checkpoint);
  } else {
    run_dual_cd(z, labels01, params, consider, checkpoint);
  }

  model.weights = std::move(best.weights);
  model.bias = best.bias;
  return model;
}

SvmModel fit(const feature::DetectionDataset& data, std::span<const std::size_t> train_idx,
             const SvmParams& params, const Standardizer* standardizer) {
  std::vector<Vec> rows;
  std::vector<int> labels;
  rows.reserve(train_idx.size());
  labels.reserve(train_idx.size());
  for (std::size_t i : train_idx) {
    rows.push_back(data.records.at(i).features);
    labels.push_back(data.records[i].label);
  }
  return fit(rows, labels, params, standardizer);
}

double decision(const SvmModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) {
    throw InputError("feature dimension " + std::to_string(x.size()) +
                     " does not match SVM dimension " + std::to_string(model.weights.size()));
  }
  double s = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) {
    s += model.weights[j] * ((x[j] - model.standardizer.mean[j]) / model.standardizer.scale[j]);
  }
  return s;
}

int predict_label(const SvmModel& model, std::span<const double> x) {
  return decision(model, x) > 0.0 ? 1 : 0;
}

}  // namespace edet::svm
