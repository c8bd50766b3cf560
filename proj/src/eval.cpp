#include "edet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::eval {

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts check(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
  Counts c;
  for (int l : labels) (l == 1 ? c.pos : c.neg)++;
  if (c.pos == 0 || c.neg == 0) {
    throw UndefinedMetricError("metric undefined: both labels must be present");
  }
  return c;
}

std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

bool reaches(std::size_t tp, std::size_t pos, double target) {
  return static_cast<double>(tp) / static_cast<double>(pos) >= target - 1e-12;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the midrank keeps every rank an integer.
  double rank_sum_x2 = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank_x2 = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_x2 += midrank_x2;
    }
    i = j;
  }
  const auto np = static_cast<double>(c.pos);
  const auto nn = static_cast<double>(c.neg);
  const double u_x2 = rank_sum_x2 - np * (np + 1.0);
  return u_x2 / (2.0 * np * nn);
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check(scores, labels);
  const auto order = order_descending(scores);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double prev_recall = 0.0;
  double area = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp)++;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(c.pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double fpr_at_tpr(std::span<const double> scores, std::span<const int> labels, double target) {
  const Counts c = check(scores, labels);
  const auto order = order_descending(scores);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp)++;
      ++j;
    }
    if (reaches(tp, c.pos, target)) return static_cast<double>(fp) / static_cast<double>(c.neg);
    i = j;
  }
  return 1.0;
}

double msp_score(const nnet::Classifier& clf, std::span<const double> input) {
  const Vec p = nnet::softmax(nnet::forward(clf, input).logits);
  return *std::max_element(p.begin(), p.end());
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const Counts c = check(scores, labels);
  const auto order = order_descending(scores);
  std::vector<RocPoint> pts;
  pts.push_back({0.0, 0.0, scores.empty() ? 0.0 : scores[order.front()] + 1.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp)++;
      ++j;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(c.neg),
                   static_cast<double>(tp) / static_cast<double>(c.pos), scores[order[i]]});
    i = j;
  }
  return pts;
}

Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels) {
  return {auroc(scores, labels), aupr(scores, labels), fpr_at_tpr(scores, labels, 0.95)};
}

MetricsReport summarize(std::vector<Metrics> folds, std::size_t n_neg, std::size_t n_pos) {
  MetricsReport r;
  r.n_negative = n_neg;
  r.n_positive = n_pos;
  if (folds.empty()) return r;
  const auto k = static_cast<double>(folds.size());
  for (const Metrics& m : folds) {
    r.mean.auroc += m.auroc / k;
    r.mean.aupr += m.aupr / k;
    r.mean.fpr95 += m.fpr95 / k;
  }
  for (const Metrics& m : folds) {
    r.stddev.auroc += (m.auroc - r.mean.auroc) * (m.auroc - r.mean.auroc) / k;
    r.stddev.aupr += (m.aupr - r.mean.aupr) * (m.aupr - r.mean.aupr) / k;
    r.stddev.fpr95 += (m.fpr95 - r.mean.fpr95) * (m.fpr95 - r.mean.fpr95) / k;
  }
  r.stddev.auroc = std::sqrt(r.stddev.auroc);
  r.stddev.aupr = std::sqrt(r.stddev.aupr);
  r.stddev.fpr95 = std::sqrt(r.stddev.fpr95);
  r.folds = std::move(folds);
  return r;
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels,
                                                       std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
  std::vector<std::size_t> neg, pos;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (neg.size() < folds || pos.size() < folds) {
    throw InputError("cannot stratify " + std::to_string(neg.size()) + "/" +
                     std::to_string(pos.size()) + " records into " + std::to_string(folds) +
                     " folds with both labels in every fold");
  }
  Rng rng(derive_seed(seed, "folds"));
  shuffle(neg, rng);
  shuffle(pos, rng);
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t deal = 0;
  for (std::size_t i : neg) out[deal++ % folds].push_back(i);
  for (std::size_t i : pos) out[deal++ % folds].push_back(i);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

Vec msp_scores(const feature::DetectionDataset& data) {
  Vec s(data.records.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = -feature::record_msp(data, data.records[i]);
  return s;
}

std::vector<int> labels_of(const feature::DetectionDataset& data) {
  std::vector<int> l(data.records.size());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = data.records[i].label;
  return l;
}

CvResult cross_validate(const feature::DetectionDataset& data, std::size_t folds,
                        const svm::SvmParams& params, std::uint64_t seed, Execution exec) {
  const std::vector<int> labels = labels_of(data);
  const auto fold_idx = stratified_folds(labels, folds, seed);
  const Vec msp = msp_scores(data);

  CvResult result;
  result.oof_scores.assign(data.records.size(), 0.0);
  result.fold_of.assign(data.records.size(), 0);
  std::vector<Metrics> svm_metrics(folds), msp_metrics(folds);

  std::vector<std::vector<std::size_t>> train_idx(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<char> held(data.records.size(), 0);
    for (std::size_t i : fold_idx[f]) held[i] = 1;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (!held[i]) train_idx[f].push_back(i);
    }
    for (std::size_t i : train_idx[f]) {
      if (held[i]) throw InputError("cross-validation leak: record in train and test fold");
    }
  }

  auto run_fold = [&](std::size_t f) {
    svm::SvmParams p = params;
    p.seed = derive_seed(params.seed, "cv-fold", f);
    const svm::SvmModel model = svm::fit(data, train_idx[f], p);
    Vec s, m;
    std::vector<int> l;
    for (std::size_t i : fold_idx[f]) {
      const double score = svm::decision(model, data.records[i].features);
      result.oof_scores[i] = score;
      result.fold_of[i] = f;
      s.push_back(score);
      m.push_back(msp[i]);
      l.push_back(labels[i]);
    }
    svm_metrics[f] = compute_metrics(s, l);
    msp_metrics[f] = compute_metrics(m, l);
  };

  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t f = 0; f < folds; ++f) run_fold(f);
  } else {
    for (std::size_t f = 0; f < folds; ++f) run_fold(f);
  }

  const std::size_t n_neg = data.count(0);
  const std::size_t n_pos = data.count(1);
  result.svm = summarize(std::move(svm_metrics), n_neg, n_pos);
  result.msp = summarize(std::move(msp_metrics), n_neg, n_pos);
  return result;
}

}  // namespace edet::eval
