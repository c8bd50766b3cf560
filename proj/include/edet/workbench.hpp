#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "edet/config.hpp"
#include "edet/dataset.hpp"
#include "edet/feature.hpp"
#include "edet/nnet.hpp"
#include "edet/persistence.hpp"

namespace edet::exp {

using Logger = std::function<void(std::string_view)>;

/// Record ids: the low 32 bits hold the test-set index of the clean source
/// input, the high 32 bits a variant tag (0 clean, 1 + kind*5 + severity-1
/// for corruptions, 64 + attack kind for adversarial examples). OoD inputs
/// use variant kOodVariant and their running index.
inline constexpr std::uint64_t kOodVariant = 0xffff;
std::uint64_t make_source_id(std::uint64_t variant, std::uint64_t index);
std::uint64_t source_index_of(std::uint64_t id);
std::uint64_t variant_of(std::uint64_t id);

struct Datasets {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<Vec> class_centers;
};

/// Blob or CIFAR-10 data per config.data. Blob train and test come from one
/// draw split by class, so they share centers.
Datasets make_datasets(const ExperimentConfig& config);

/// Trains the base classifier on `train`.
nnet::Classifier train_classifier(const ExperimentConfig& config, const LabeledDataset& train,
                                  nnet::TrainReport* report = nullptr);

/// Every input pool the experiments draw on, keyed by family. The correct
/// pool and every erroneous pool built from test inputs come from disjoint
/// clean sources.
struct PoolSet {
  std::map<feature::Family, feature::Pool> pools;
  std::size_t test_size = 0;
  std::size_t test_correct = 0;
  std::map<std::string, std::size_t> attack_attempted;

  const feature::Pool* find(feature::Family family) const;
};

PoolSet build_pools(const ExperimentConfig& config, const nnet::Classifier& clf,
                    const Datasets& data, Execution exec = Execution::parallel);

/// Pipeline state shared by all experiments: the classifier, the pools and the
/// unbalanced features of every pool member.
struct Workbench {
  ExperimentConfig config;
  nnet::Classifier classifier;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  PoolSet pools;
  feature::DetectionDataset features;

  /// Unbalanced records whose family is in `negatives` (label 0) or
  /// `positives` (label 1).
  feature::DetectionDataset select(std::span<const feature::Family> negatives,
                                   std::span<const feature::Family> positives) const;
};

/// Artifact paths under config.output_dir.
std::filesystem::path classifier_path(const ExperimentConfig& config);
std::filesystem::path pools_dir(const ExperimentConfig& config);

/// Loads the classifier if a cached one with the same config hash exists,
/// else trains and saves it.
nnet::Classifier obtain_classifier(const ExperimentConfig& config, const Datasets& data,
                                   const Logger& log);

/// Loads cached pools with a matching config hash, else builds and saves them.
PoolSet obtain_pools(const ExperimentConfig& config, const nnet::Classifier& clf,
                     const Datasets& data, const Logger& log,
                     Execution exec = Execution::parallel);

void save_pools(const ExperimentConfig& config, const PoolSet& pools);

Workbench build_workbench(const ExperimentConfig& config, const Logger& log,
                          Execution exec = Execution::parallel);

}  // namespace edet::exp
