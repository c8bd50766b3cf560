#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edet/common.hpp"
#include "edet/nnet.hpp"

namespace edet::feature {

/// Provenance of a detection record.
enum class Family : std::uint32_t {
  correct = 0,
  misclassified = 1,
  ood = 2,
  corrupted = 3,
  fgsm = 4,
  pgd = 5,
  cw_l2 = 6,
  cw_linf = 7,
  corrupted_correct = 8,
};

inline constexpr std::size_t kFamilyCount = 9;

/// "correct", "misclassified", "ood", "corrupted", "adversarial:fgsm", ...,
/// "corrupted-correct".
std::string_view to_string(Family family);
Family parse_family(std::string_view text);
/// 0 for correctly processed families (correct, corrupted-correct), else 1.
int default_label(Family family);

struct DetectionRecord {
  Vec features;
  int label = 0;
  Family family = Family::correct;
  /// Identity of the underlying input; equal ids mean the same source input.
  std::uint64_t source_id = 0;

  bool operator==(const DetectionRecord&) const = default;
};

struct Manifest {
  std::map<std::string, std::size_t> pre_balance_counts;
  std::map<std::string, std::size_t> post_balance_counts;
  std::uint64_t balance_seed = 0;

  bool operator==(const Manifest&) const = default;
};

struct DetectionDataset {
  std::size_t penultimate_dim = 0;
  std::size_t class_count = 0;
  std::vector<DetectionRecord> records;
  Manifest manifest;

  std::size_t feature_dim() const { return penultimate_dim + class_count; }
  std::size_t count(int label) const;
  bool operator==(const DetectionDataset&) const = default;
};

/// Inputs destined for one family, with their source ids and, where
/// meaningful, their true labels (empty for OoD).
struct Pool {
  Family family = Family::correct;
  std::vector<Vec> inputs;
  std::vector<std::uint64_t> source_ids;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.size(); }
};

/// [penultimate activations, softmax sorted descending]; dim P + K.
Vec extract_features(const nnet::Classifier& clf, std::span<const double> input);

/// Batch extraction; the OpenMP path writes into pre-sized slots so both
/// modes produce identical output.
std::vector<Vec> extract_features_batch(const nnet::Classifier& clf,
                                        std::span<const Vec> inputs, Execution exec);

/// Features for every pool member, unbalanced. Every record takes
/// default_label(pool.family).
DetectionDataset assemble(const nnet::Classifier& clf, std::span<const Pool> pools,
                          Execution exec = Execution::parallel);

/// Subsamples the majority label (seeded, uniform, without replacement) so
/// both labels have equal counts. Relative record order is preserved.
/// Records `pre_balance_counts` per family when the manifest has none yet.
DetectionDataset balance(DetectionDataset data, std::uint64_t seed);

/// Correct pool against the union of erroneous pools, balanced. Throws
/// InputError if either side is empty or a correct-pool input is
/// mispredicted by the classifier.
DetectionDataset build_detection_dataset(const nnet::Classifier& clf, const Pool& correct,
                                         std::span<const Pool> erroneous,
                                         std::uint64_t balance_seed,
                                         Execution exec = Execution::parallel);

/// Keeps records whose MSP (first sorted-softmax component) exceeds
/// `threshold`, then re-balances. An empty result is returned, not thrown.
DetectionDataset filter_high_msp(const DetectionDataset& data, double threshold,
                                 std::uint64_t balance_seed);

/// First sorted-softmax component of a record.
double record_msp(const DetectionDataset& data, const DetectionRecord& record);

/// New dataset with records from `base_families` labelled 0 and from
/// `second_families` labelled 1; other records are dropped. Used by pairwise
/// experiments where an erroneous family plays the base role.
DetectionDataset relabel(const DetectionDataset& data, std::span<const Family> base_families,
                         std::span<const Family> second_families);

}  // namespace edet::feature
