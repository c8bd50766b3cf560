#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edet/common.hpp"
#include "edet/feature.hpp"
#include "edet/nnet.hpp"
#include "edet/svm.hpp"

namespace edet::eval {

// Scores are "more erroneous is higher"; label 1 is the positive class.
// Every metric throws UndefinedMetricError unless both labels are present,
// and InputError when lengths differ.

/// Mann-Whitney: P(s_pos > s_neg) + 0.5 P(s_pos == s_neg), from midranks.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Step-wise area under precision-recall: thresholds are visited from the
/// highest score down, each tie block as one step, and every step adds
/// (recall gain) * (precision at the step).
double aupr(std::span<const double> scores, std::span<const int> labels);

/// FPR at the largest threshold t for which predicting "score >= t" reaches
/// TPR >= target. Tie blocks are accepted or rejected as a whole.
double fpr_at_tpr(std::span<const double> scores, std::span<const int> labels,
                  double target = 0.95);

/// Maximum softmax probability. As an erroneous-score use its negation.
double msp_score(const nnet::Classifier& clf, std::span<const double> input);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

/// ROC vertices from (0, 0) to (1, 1), one per distinct score.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

struct Metrics {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
};

Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
  Metrics mean;
  Metrics stddev;
  std::vector<Metrics> folds;
  std::size_t n_negative = 0;
  std::size_t n_positive = 0;
};

/// Mean and population standard deviation over folds.
MetricsReport summarize(std::vector<Metrics> folds, std::size_t n_neg, std::size_t n_pos);

/// Seeded stratified k-fold assignment: the indices of each label are
/// shuffled and dealt round-robin, continuing the deal across labels so fold
/// sizes differ by at most one overall and per label.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels,
                                                       std::size_t folds, std::uint64_t seed);

struct CvResult {
  MetricsReport svm;
  MetricsReport msp;
  /// Held-out decision score of every record (from the model that did not
  /// see it) and the fold it was held out in.
  Vec oof_scores;
  std::vector<std::size_t> fold_of;
};

/// k-fold cross-validation of the linear SVM detector, with the MSP baseline
/// (-MSP as score) evaluated on each held-out fold for comparison. Fold
/// models are independent and fitted in parallel under Execution::parallel;
/// aggregation order is fixed.
CvResult cross_validate(const feature::DetectionDataset& data, std::size_t folds,
                        const svm::SvmParams& params, std::uint64_t seed,
                        Execution exec = Execution::parallel);

/// -MSP for each record of a dataset.
Vec msp_scores(const feature::DetectionDataset& data);
std::vector<int> labels_of(const feature::DetectionDataset& data);

}  // namespace edet::eval
