#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "edet/error.hpp"
#include "edet/eval.hpp"
#include "edet/rng.hpp"
#include "edet/svm.hpp"

using namespace edet;

namespace {

struct Toy {
  std::vector<Vec> x;
  std::vector<int> y;
};

Toy gaussian_toy(std::size_t n, std::size_t dim, double shift, std::uint64_t seed) {
  Rng rng(seed);
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    Vec v(dim);
    for (std::size_t j = 0; j < dim; ++j) v[j] = rng.normal() + (j == 0 && y ? shift : 0.0);
    t.x.push_back(std::move(v));
    t.y.push_back(y);
  }
  return t;
}

double hinge_objective(double w0, double w1, double b, const std::vector<Vec>& z,
                       const std::vector<int>& y, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double s = y[i] ? 1.0 : -1.0;
    loss += std::max(0.0, 1.0 - s * (w0 * z[i][0] + w1 * z[i][1] + b));
  }
  return 0.5 * lambda * (w0 * w0 + w1 * w1) + loss / static_cast<double>(z.size());
}

/// For fixed w the objective is convex piecewise linear in b, so its minimum
/// lies on one of the hinge breakpoints b = s_i - w . z_i.
double best_over_bias(double w0, double w1, const std::vector<Vec>& z, const std::vector<int>& y,
                      double lambda) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double s = y[i] ? 1.0 : -1.0;
    const double b = s - (w0 * z[i][0] + w1 * z[i][1]);
    best = std::min(best, hinge_objective(w0, w1, b, z, y, lambda));
  }
  return best;
}

double grid_minimum(const std::vector<Vec>& z, const std::vector<int>& y, double lambda) {
  double best = std::numeric_limits<double>::infinity();
  double c0 = 0.0, c1 = 0.0;
  for (double w0 = -4.0; w0 <= 4.0; w0 += 0.05) {
    for (double w1 = -4.0; w1 <= 4.0; w1 += 0.05) {
      const double v = best_over_bias(w0, w1, z, y, lambda);
      if (v < best) {
        best = v;
        c0 = w0;
        c1 = w1;
      }
    }
  }
  for (double w0 = c0 - 0.1; w0 <= c0 + 0.1; w0 += 0.004) {
    for (double w1 = c1 - 0.1; w1 <= c1 + 0.1; w1 += 0.004) {
      best = std::min(best, best_over_bias(w0, w1, z, y, lambda));
    }
  }
  return best;
}

std::vector<Vec> standardize_all(const svm::SvmModel& m, const std::vector<Vec>& x) {
  std::vector<Vec> z;
  for (const Vec& v : x) z.push_back(m.standardizer.apply(v));
  return z;
}

}  // namespace

TEST(Svm, TwoSeparablePoints) {
  const std::vector<Vec> x = {{0.0, 1.0}, {1.0, 0.0}};
  const std::vector<int> y = {0, 1};
  const auto m = svm::fit(x, y, svm::SvmParams{});
  EXPECT_EQ(svm::predict_label(m, x[0]), 0);
  EXPECT_EQ(svm::predict_label(m, x[1]), 1);
}

TEST(Svm, ObjectiveWithinTwoPercentOfGridSearch) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Toy t = gaussian_toy(40, 2, 1.5, seed);
    svm::SvmParams p;
    p.lambda = 0.1;
    p.epochs = 200;
    const auto z = standardize_all(svm::fit(t.x, t.y, p), t.x);
    const double ref = grid_minimum(z, t.y, p.lambda);
    for (svm::Solver s : {svm::Solver::dual_cd, svm::Solver::pegasos}) {
      p.solver = s;
      const auto m = svm::fit(t.x, t.y, p);
      const double got = svm::objective(m.weights, m.bias, z, t.y, p.lambda);
      EXPECT_NEAR(got, ref, 0.02 * ref) << svm::to_string(s) << " seed " << seed;
    }
  }
}

TEST(Svm, FlippedLabelsNegateScores) {
  const Toy t = gaussian_toy(60, 4, 1.0, 7);
  std::vector<int> flipped(t.y.size());
  std::transform(t.y.begin(), t.y.end(), flipped.begin(), [](int v) { return 1 - v; });
  svm::SvmParams p;
  p.lambda = 0.01;
  const auto a = svm::fit(t.x, t.y, p);
  const auto b = svm::fit(t.x, flipped, p);
  const auto back = svm::fit(t.x, std::vector<int>(t.y), p);
  for (const Vec& v : t.x) {
    EXPECT_NEAR(svm::decision(b, v), -svm::decision(a, v), 1e-6);
    EXPECT_NEAR(svm::decision(back, v), svm::decision(a, v), 1e-12);
  }
}

TEST(Svm, TraceNonIncreasingAndDeterministic) {
  const Toy t = gaussian_toy(200, 6, 0.8, 8);
  for (svm::Solver s : {svm::Solver::dual_cd, svm::Solver::pegasos}) {
    svm::SvmParams p;
    p.solver = s;
    p.lambda = 1e-3;
    const auto m = svm::fit(t.x, t.y, p);
    ASSERT_EQ(m.objective_trace.size(), p.epochs + 1);
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i) {
      EXPECT_LE(m.objective_trace[i], m.objective_trace[i - 1] + 1e-9);
    }
    EXPECT_LE(m.objective_trace.back(), m.objective_trace.front());
    EXPECT_EQ(m, svm::fit(t.x, t.y, p));
  }
}

TEST(Svm, RejectsBadInput) {
  const std::vector<Vec> x = {{0.0}, {1.0}};
  EXPECT_THROW(svm::fit(x, std::vector<int>{1, 1}, svm::SvmParams{}), InputError);
  svm::SvmParams p;
  p.lambda = 0.0;
  EXPECT_THROW(svm::fit(x, std::vector<int>{0, 1}, p), InputError);
  const auto m = svm::fit(x, std::vector<int>{0, 1}, svm::SvmParams{});
  EXPECT_THROW(svm::decision(m, Vec{1.0, 2.0}), InputError);
  EXPECT_THROW(svm::parse_solver("smo"), InputError);
}

TEST(Decision, BiasAtMeanAndAffine) {
  svm::SvmModel m;
  m.standardizer = {{0.5, 2.0}, {1.0, 4.0}};
  m.weights = {0.0, 0.0};
  m.bias = 0.7;
  EXPECT_EQ(svm::decision(m, Vec{0.5, 2.0}), 0.7);
  m.weights = {1.5, -2.0};
  const Vec a = {0.3, 5.0}, b = {1.1, -1.0}, mid = {0.7, 2.0};
  EXPECT_NEAR(svm::decision(m, mid), 0.5 * (svm::decision(m, a) + svm::decision(m, b)), 1e-12);
  m.bias = 0.0;
  m.weights = {1.0, 0.0};
  EXPECT_EQ(svm::decision(m, Vec{0.5, 9.0}), 0.0);
  EXPECT_EQ(svm::predict_label(m, Vec{0.5, 9.0}), 0);
  EXPECT_EQ(svm::predict_label(m, Vec{0.6, 9.0}), 1);
  EXPECT_EQ(svm::predict_label(m, Vec{10.0, 9.0}), 1);
}

TEST(Standardizer, ZeroVarianceKeepsUnitScale) {
  const std::vector<Vec> rows = {{1.0, 3.0}, {2.0, 3.0}, {3.0, 3.0}};
  const auto s = svm::Standardizer::fit(rows);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_EQ(s.scale[1], 1.0);
  EXPECT_GT(s.scale[0], 0.0);
  const Vec z = s.apply(rows[2]);
  EXPECT_EQ(z[1], 0.0);
}

TEST(Standardizer, LeakingTestFoldChangesTheModel) {
  const Toy t = gaussian_toy(100, 5, 1.0, 9);
  std::vector<int> labels(t.y);
  const auto folds = eval::stratified_folds(labels, 5, 3);
  std::vector<Vec> train_x, all_x = t.x;
  std::vector<int> train_y;
  for (std::size_t f = 1; f < 5; ++f) {
    for (std::size_t i : folds[f]) {
      train_x.push_back(t.x[i]);
      train_y.push_back(t.y[i]);
    }
  }
  const svm::SvmParams p;
  const auto clean = svm::fit(train_x, train_y, p);
  const auto leaky_std = svm::Standardizer::fit(all_x);
  const auto leaky = svm::fit(train_x, train_y, p, &leaky_std);
  EXPECT_NE(clean.standardizer, leaky.standardizer);
  EXPECT_NE(clean, leaky);
  EXPECT_EQ(clean.standardizer, svm::Standardizer::fit(train_x));
}

TEST(Standardizer, ColumnRescalingLeavesHeldOutLabels) {
  const Toy train = gaussian_toy(120, 4, 1.2, 10);
  const Toy test = gaussian_toy(80, 4, 1.2, 11);
  auto scaled = [](std::vector<Vec> x) {
    for (Vec& v : x) v[2] *= 1000.0;
    return x;
  };
  const svm::SvmParams p;
  const auto a = svm::fit(train.x, train.y, p);
  const auto b = svm::fit(scaled(train.x), train.y, p);
  const auto test_scaled = scaled(test.x);
  for (std::size_t i = 0; i < test.x.size(); ++i) {
    EXPECT_EQ(svm::predict_label(a, test.x[i]), svm::predict_label(b, test_scaled[i]));
  }
}

TEST(Svm, HeldOutSeparableIsPerfect) {
  const Toy train = gaussian_toy(100, 3, 12.0, 12);
  const Toy test = gaussian_toy(100, 3, 12.0, 13);
  const auto m = svm::fit(train.x, train.y, svm::SvmParams{});
  for (std::size_t i = 0; i < test.x.size(); ++i) {
    EXPECT_EQ(svm::predict_label(m, test.x[i]), test.y[i]);
  }
}

TEST(Svm, OptimalBiasMinimizesHinge) {
  const Toy t = gaussian_toy(30, 2, 1.0, 14);
  const Vec w = {0.8, -0.3};
  const double b = svm::optimal_bias(w, t.x, t.y);
  const double at = svm::objective(w, b, t.x, t.y, 0.1);
  for (double d = -1.0; d <= 1.0; d += 0.01) {
    EXPECT_LE(at, svm::objective(w, b + d, t.x, t.y, 0.1) + 1e-12);
  }
}
