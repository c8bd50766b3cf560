#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edet/error.hpp"
#include "edet/feature.hpp"
#include "support/oracles.hpp"

using namespace edet;
using feature::Family;

namespace {

/// P = 8 identity hidden layer feeding logits log(p).
nnet::Classifier fixed_softmax(const Vec& p) {
  nnet::DenseLayer h{8, 8, Vec(64, 0.0), Vec(8, 0.0)};
  for (std::size_t i = 0; i < 8; ++i) h.weights[i * 8 + i] = 1.0;
  nnet::DenseLayer out{8, p.size(), Vec(8 * p.size(), 0.0), {}};
  for (double v : p) out.bias.push_back(std::log(v));
  return nnet::Classifier({h, out}, 0);
}

feature::DetectionDataset counts(std::size_t n_correct, std::size_t n_err) {
  feature::DetectionDataset d;
  d.penultimate_dim = 1;
  d.class_count = 2;
  for (std::size_t i = 0; i < n_correct + n_err; ++i) {
    const bool err = i >= n_correct;
    const double msp = 0.5 + 0.5 * static_cast<double>(i % 10) / 10.0;
    d.records.push_back({{static_cast<double>(i), msp, 1.0 - msp}, err ? 1 : 0,
                         err ? (i % 2 ? Family::ood : Family::fgsm) : Family::correct, i});
  }
  return d;
}

}  // namespace

TEST(Features, PaperDimension) {
  Rng rng(1);
  const std::size_t dims[] = {4, 2048, 10};
  const auto clf = oracle::random_net(rng, dims);
  EXPECT_EQ(feature::extract_features(clf, Vec{0.1, 0.2, 0.3, 0.4}).size(), 2058u);
}

TEST(Features, SortedSoftmaxBlock) {
  const auto clf = fixed_softmax({0.1, 0.7, 0.2});
  const Vec x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  const Vec f = feature::extract_features(clf, x);
  ASSERT_EQ(f.size(), 11u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(f[i], x[i]);
  EXPECT_NEAR(f[8], 0.7, 1e-12);
  EXPECT_NEAR(f[9], 0.2, 1e-12);
  EXPECT_NEAR(f[10], 0.1, 1e-12);
}

TEST(Features, ClassOrderPermutationLeavesBlockUnchanged) {
  Rng rng(2);
  const std::size_t dims[] = {6, 9, 5};
  const auto clf = oracle::random_net(rng, dims);
  auto layers = clf.layers();
  auto& last = layers.back();
  const std::size_t perm[] = {3, 0, 4, 1, 2};
  nnet::DenseLayer p = last;
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < last.in; ++c) p.weights[r * last.in + c] = last.weights[perm[r] * last.in + c];
    p.bias[r] = last.bias[perm[r]];
  }
  last = p;
  const nnet::Classifier permuted(layers, 0);
  const Vec x = {0.9, 0.1, 0.5, 0.5, 0.3, 0.7};
  const Vec a = feature::extract_features(clf, x);
  const Vec b = feature::extract_features(permuted, x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Features, BlockNonIncreasingAndNormalized) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.index(9);
    const std::size_t dims[] = {5, 7, k};
    const auto clf = oracle::random_net(rng, dims);
    Vec x(5);
    for (double& v : x) v = rng.uniform();
    const Vec f = feature::extract_features(clf, x);
    double s = 0.0;
    for (std::size_t i = 7; i < f.size(); ++i) {
      s += f[i];
      if (i > 7) EXPECT_LE(f[i], f[i - 1]);
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Features, BatchSerialMatchesParallel) {
  Rng rng(4);
  const std::size_t dims[] = {6, 9, 4};
  const auto clf = oracle::random_net(rng, dims);
  std::vector<Vec> xs(300, Vec(6));
  for (auto& x : xs) {
    for (double& v : x) v = rng.uniform();
  }
  EXPECT_EQ(feature::extract_features_batch(clf, xs, Execution::serial),
            feature::extract_features_batch(clf, xs, Execution::parallel));
  xs.push_back(Vec(3, 0.0));
  EXPECT_THROW(feature::extract_features_batch(clf, xs, Execution::serial), ConfigError);
}

TEST(Balance, ArithmeticAndManifest) {
  const auto b = feature::balance(counts(100, 40), 5);
  EXPECT_EQ(b.count(0), 40u);
  EXPECT_EQ(b.count(1), 40u);
  EXPECT_EQ(b.manifest.pre_balance_counts.at("correct"), 100u);
  EXPECT_EQ(b.manifest.pre_balance_counts.at("ood"), 20u);
  EXPECT_EQ(b.manifest.post_balance_counts.at("correct"), 40u);
  EXPECT_EQ(b.manifest.balance_seed, 5u);
  for (std::size_t i = 1; i < b.records.size(); ++i) {
    EXPECT_LT(b.records[i - 1].source_id, b.records[i].source_id);
  }
  EXPECT_EQ(b, feature::balance(counts(100, 40), 5));
  EXPECT_NE(b, feature::balance(counts(100, 40), 6));
}

TEST(Balance, ErroneousMajorityAndEqualSides) {
  const auto b = feature::balance(counts(30, 70), 1);
  EXPECT_EQ(b.count(0), 30u);
  EXPECT_EQ(b.count(1), 30u);
  const auto same = feature::balance(counts(25, 25), 1);
  EXPECT_EQ(same.records, counts(25, 25).records);
}

TEST(Labels, DefaultLabelFollowsFamily) {
  for (std::uint32_t f = 0; f < feature::kFamilyCount; ++f) {
    const auto fam = static_cast<Family>(f);
    const bool correct = fam == Family::correct || fam == Family::corrupted_correct;
    EXPECT_EQ(feature::default_label(fam), correct ? 0 : 1);
    EXPECT_EQ(feature::parse_family(feature::to_string(fam)), fam);
  }
  EXPECT_EQ(feature::to_string(Family::cw_l2), "adversarial:cw-l2");
  EXPECT_THROW(feature::parse_family("adversarial:lots"), InputError);
}

TEST(DetectionDataset, BuildBalancesAndNamesEmptySide) {
  Rng rng(6);
  const std::size_t dims[] = {4, 5, 3};
  const auto clf = oracle::random_net(rng, dims);
  feature::Pool correct{Family::correct, {}, {}, {}};
  feature::Pool ood{Family::ood, {}, {}, {}};
  for (std::size_t i = 0; i < 60; ++i) {
    Vec x(4);
    for (double& v : x) v = rng.uniform();
    if (i < 40) {
      correct.inputs.push_back(x);
      correct.source_ids.push_back(i);
      correct.labels.push_back(nnet::predict(clf, x));
    } else {
      ood.inputs.push_back(x);
      ood.source_ids.push_back(1000 + i);
    }
  }
  const feature::Pool err[] = {ood};
  const auto d = feature::build_detection_dataset(clf, correct, err, 3);
  EXPECT_EQ(d.count(0), 20u);
  EXPECT_EQ(d.count(1), 20u);
  EXPECT_EQ(d.feature_dim(), 8u);
  for (const auto& r : d.records) EXPECT_EQ(r.label, r.family == Family::ood ? 1 : 0);

  const feature::Pool none[] = {feature::Pool{Family::ood, {}, {}, {}}};
  try {
    feature::build_detection_dataset(clf, correct, none, 3);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("erroneous"), std::string::npos);
  }
  try {
    feature::build_detection_dataset(clf, feature::Pool{}, err, 3);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("correct"), std::string::npos);
  }
  feature::Pool bad = correct;
  bad.labels[0] = (bad.labels[0] + 1) % 3;
  EXPECT_THROW(feature::build_detection_dataset(clf, bad, err, 3), InputError);
}

TEST(HighMsp, ThresholdEdgesAndRebalance) {
  const auto d = counts(100, 40);
  const auto all = feature::filter_high_msp(d, 0.0, 1);
  EXPECT_EQ(all.manifest.pre_balance_counts.at("correct"), 100u);
  EXPECT_EQ(all.count(0), all.count(1));
  EXPECT_TRUE(feature::filter_high_msp(d, 1.0, 1).records.empty());
  const auto high = feature::filter_high_msp(d, 0.8, 1);
  for (const auto& r : high.records) EXPECT_GT(feature::record_msp(high, r), 0.8);
  EXPECT_EQ(high.count(0), high.count(1));
  EXPECT_THROW(feature::filter_high_msp(d, 1.5, 1), InputError);
}

TEST(Relabel, BaseFamilyTakesLabelZero) {
  const auto d = counts(10, 20);
  const Family base[] = {Family::ood};
  const Family second[] = {Family::fgsm};
  const auto r = feature::relabel(d, base, second);
  EXPECT_EQ(r.records.size(), 20u);
  for (const auto& rec : r.records) EXPECT_EQ(rec.label, rec.family == Family::ood ? 0 : 1);
}
