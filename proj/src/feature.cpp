#include "edet/feature.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <string>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::feature {

namespace {

constexpr std::array<std::string_view, kFamilyCount> kNames = {
    "correct",          "misclassified",   "ood",
    "corrupted",        "adversarial:fgsm", "adversarial:pgd",
    "adversarial:cw-l2", "adversarial:cw-linf", "corrupted-correct"};

}  // namespace

std::string_view to_string(Family family) {
  return kNames.at(static_cast<std::size_t>(family));
}

Family parse_family(std::string_view text) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == text) return static_cast<Family>(i);
  }
  // Accept bare attack names too.
  if (text == "fgsm") return Family::fgsm;
  if (text == "pgd") return Family::pgd;
  if (text == "cw-l2") return Family::cw_l2;
  if (text == "cw-linf") return Family::cw_linf;
  throw InputError("unknown family tag '" + std::string(text) + "'");
}

int default_label(Family family) {
  return family == Family::correct || family == Family::corrupted_correct ? 0 : 1;
}

std::size_t DetectionDataset::count(int label) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [label](const DetectionRecord& r) { return r.label == label; }));
}

Vec extract_features(const nnet::Classifier& clf, std::span<const double> input) {
  nnet::ForwardPass f = nnet::forward(clf, input);
  Vec probs = nnet::softmax(f.logits);
  std::sort(probs.begin(), probs.end(), std::greater<>());
  Vec out = std::move(f.penultimate);
  out.insert(out.end(), probs.begin(), probs.end());
  return out;
}

std::vector<Vec> extract_features_batch(const nnet::Classifier& clf,
                                        std::span<const Vec> inputs, Execution exec) {
  for (const Vec& x : inputs) {
    if (x.size() != clf.input_dim()) {
      throw ConfigError("input dimension does not match classifier");
    }
  }
  std::vector<Vec> out(inputs.size());
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = extract_features(clf, inputs[i]);
  } else {
    for (std::size_t i = 0; i < inputs.size(); ++i) out[i] = extract_features(clf, inputs[i]);
  }
  return out;
}

DetectionDataset assemble(const nnet::Classifier& clf, std::span<const Pool> pools,
                          Execution exec) {
  DetectionDataset out;
  out.penultimate_dim = clf.penultimate_dim();
  out.class_count = clf.class_count();
  for (const Pool& pool : pools) {
    if (pool.source_ids.size() != pool.inputs.size()) {
      throw InputError("pool " + std::string(to_string(pool.family)) +
                       " has mismatched source id count");
    }
    std::vector<Vec> feats = extract_features_batch(clf, pool.inputs, exec);
    for (std::size_t i = 0; i < feats.size(); ++i) {
      out.records.push_back(
          {std::move(feats[i]), default_label(pool.family), pool.family, pool.source_ids[i]});
    }
  }
  return out;
}

DetectionDataset balance(DetectionDataset data, std::uint64_t seed) {
  if (data.manifest.pre_balance_counts.empty()) {
    for (const auto& r : data.records) ++data.manifest.pre_balance_counts[std::string(to_string(r.family))];
  }
  data.manifest.balance_seed = seed;

  std::vector<std::size_t> neg, pos;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    (data.records[i].label == 0 ? neg : pos).push_back(i);
  }
  const std::size_t target = std::min(neg.size(), pos.size());
  Rng rng(derive_seed(seed, "balance"));
  std::vector<char> keep(data.records.size(), 1);
  auto thin = [&](const std::vector<std::size_t>& side) {
    if (side.size() == target) return;
    for (std::size_t i : side) keep[i] = 0;
    for (std::size_t j : sample_without_replacement(side.size(), target, rng)) keep[side[j]] = 1;
  };
  thin(neg);
  thin(pos);

  std::vector<DetectionRecord> kept;
  kept.reserve(2 * target);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    if (keep[i]) kept.push_back(std::move(data.records[i]));
  }
  data.records = std::move(kept);
  data.manifest.post_balance_counts.clear();
  for (const auto& r : data.records) ++data.manifest.post_balance_counts[std::string(to_string(r.family))];
  return data;
}

DetectionDataset build_detection_dataset(const nnet::Classifier& clf, const Pool& correct,
                                         std::span<const Pool> erroneous,
                                         std::uint64_t balance_seed, Execution exec) {
  if (correct.size() == 0) throw InputError("correct side of the detection dataset is empty");
  std::size_t n_err = 0;
  for (const Pool& p : erroneous) n_err += p.size();
  if (n_err == 0) throw InputError("erroneous side of the detection dataset is empty");
  if (correct.labels.size() != correct.size()) {
    throw InputError("correct pool needs a true label per input");
  }
  for (std::size_t i = 0; i < correct.size(); ++i) {
    if (nnet::predict(clf, correct.inputs[i]) != correct.labels[i]) {
      throw InputError("correct pool contains a mispredicted input");
    }
  }
  std::vector<Pool> pools;
  pools.reserve(erroneous.size() + 1);
  pools.push_back(correct);
  pools.back().family = Family::correct;
  pools.insert(pools.end(), erroneous.begin(), erroneous.end());
  return balance(assemble(clf, pools, exec), balance_seed);
}

double record_msp(const DetectionDataset& data, const DetectionRecord& record) {
  return record.features.at(data.penultimate_dim);
}

DetectionDataset filter_high_msp(const DetectionDataset& data, double threshold,
                                 std::uint64_t balance_seed) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InputError("MSP threshold must lie in [0, 1]");
  }
  DetectionDataset out;
  out.penultimate_dim = data.penultimate_dim;
  out.class_count = data.class_count;
  for (const auto& r : data.records) {
    if (record_msp(data, r) > threshold) out.records.push_back(r);
  }
  for (const auto& r : out.records) ++out.manifest.pre_balance_counts[std::string(to_string(r.family))];
  return balance(std::move(out), balance_seed);
}

DetectionDataset relabel(const DetectionDataset& data, std::span<const Family> base_families,
                         std::span<const Family> second_families) {
  DetectionDataset out;
  out.penultimate_dim = data.penultimate_dim;
  out.class_count = data.class_count;
  auto in = [](std::span<const Family> set, Family f) {
    return std::find(set.begin(), set.end(), f) != set.end();
  };
  for (const auto& r : data.records) {
    if (in(base_families, r.family)) {
      out.records.push_back(r);
      out.records.back().label = 0;
    } else if (in(second_families, r.family)) {
      out.records.push_back(r);
      out.records.back().label = 1;
    }
  }
  return out;
}

}  // namespace edet::feature
