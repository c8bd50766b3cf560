#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edet/config.hpp"
#include "edet/eval.hpp"
#include "edet/workbench.hpp"

namespace edet::exp {

/// One (experiment, family, detector) row. `family` names the erroneous side,
/// or "a|b" for pairwise rows where a is the base family.
struct ResultRow {
  std::string experiment;
  std::string family;
  std::string detector;  // "svm", "msp", "svm-leave-out", "svm-in-training"
  eval::MetricsReport report;
};

struct Skip {
  std::string experiment;
  std::string family;
  std::string reason;
};

/// Decision-score histogram of one family under one experiment's detector.
struct Histogram {
  std::string experiment;
  std::string family;
  std::vector<double> edges;  // bins + 1 ascending edges shared by the experiment
  std::vector<std::size_t> counts;
};

struct RocSeries {
  std::string experiment;
  std::string detector;
  std::vector<eval::RocPoint> points;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::per_set;
  std::vector<ResultRow> rows;
  std::vector<Skip> skips;
  std::vector<Histogram> histograms;
  std::vector<RocSeries> rocs;
  /// Free-form facts such as the threshold used or the largest drop.
  std::map<std::string, std::string> notes;
  /// Balanced dataset sizes per row key, "<family>" -> per-family counts.
  std::map<std::string, std::map<std::string, std::size_t>> sizes;
};

struct RunResults {
  std::uint64_t master_seed = 0;
  std::uint64_t config_hash = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::map<std::string, std::size_t> pool_sizes;
  std::vector<ExperimentResult> experiments;

  /// First row matching, or nullptr.
  const ResultRow* find(std::string_view experiment, std::string_view family,
                        std::string_view detector) const;
};

/// Families that PGD-free combined, separability, high-MSP and leave-one-out
/// runs draw on, in canonical order.
std::vector<feature::Family> erroneous_families(bool include_pgd);

/// Balanced correct-vs-`positives` detection set with a seed derived from the
/// tag.
feature::DetectionDataset balanced_set(const Workbench& wb,
                                       std::span<const feature::Family> negatives,
                                       std::span<const feature::Family> positives,
                                       std::string_view tag);

/// Highest threshold t <= configured such that both labels keep at least
/// `min_per_class` records with MSP > t; nullopt when impossible.
std::optional<double> high_msp_threshold(const feature::DetectionDataset& data,
                                         double configured, std::size_t min_per_class,
                                         bool fallback);

ExperimentResult run_per_set(const Workbench& wb, Execution exec = Execution::parallel);
ExperimentResult run_combined(const Workbench& wb, Execution exec = Execution::parallel);
ExperimentResult run_separability(const Workbench& wb, Execution exec = Execution::parallel);
ExperimentResult run_high_msp(const Workbench& wb, Execution exec = Execution::parallel);
ExperimentResult run_leave_one_out(const Workbench& wb, Execution exec = Execution::parallel);
ExperimentResult run_corrupted_correct(const Workbench& wb,
                                       Execution exec = Execution::parallel);
ExperimentResult run_pgd_only(const Workbench& wb, Execution exec = Execution::parallel);

ExperimentResult run_experiment(const Workbench& wb, ExperimentKind kind,
                                Execution exec = Execution::parallel);

/// Runs `kinds` (config.experiments when empty) in the given order. With
/// config.parallel_experiments the experiments themselves run concurrently,
/// each with serial kernels; results keep the requested order either way.
RunResults run_all(const Workbench& wb, std::vector<ExperimentKind> kinds, const Logger& log);

}  // namespace edet::exp
