#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edet/attack.hpp"
#include "edet/corrupt.hpp"
#include "edet/datagen.hpp"
#include "edet/nnet.hpp"
#include "edet/svm.hpp"

namespace edet::exp {

enum class ExperimentKind {
  per_set,
  combined,
  separability,
  high_msp,
  leave_one_out,
  corrupted_correct,
  pgd_only,
};

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment(std::string_view text);
std::vector<ExperimentKind> all_experiments();

struct DataConfig {
  std::string source = "blobs";  // "blobs" or "cifar"
  std::string cifar_dir;
  std::size_t class_count = 10;
  std::size_t dim = 64;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 500;
  double spread = 0.3;
  std::size_t latent_dim = 0;
  std::optional<corrupt::Geometry> geometry = corrupt::Geometry{8, 8, 1};
};

struct ClassifierConfig {
  std::vector<std::size_t> hidden = {64, 32};
  nnet::TrainConfig train;
};

struct OodSetConfig {
  data::OodMode mode = data::OodMode::structured;
  std::size_t n = 500;
  double margin = 1.0;
  double spread = 0.05;
  double wide_spread = 0.3;
};

/// How the correctly classified test inputs are divided among the correct
/// pool, the corruption sources and the attack sources (the remainder is
/// shared evenly by the configured attacks).
struct PoolConfig {
  double correct_fraction = 0.4;
  double corruption_fraction = 0.05;
};

struct CorruptionConfig {
  std::vector<corrupt::Kind> kinds{corrupt::kAllKinds.begin(), corrupt::kAllKinds.end()};
  std::vector<int> severities = {1, 2, 3, 4, 5};
  corrupt::SeverityTable table = corrupt::SeverityTable::defaults();
};

struct HighMspConfig {
  double threshold = 0.99999;
  std::size_t min_per_class = 50;
  bool fallback = true;
};

struct SvmConfig {
  svm::SvmParams params;
  std::size_t folds = 5;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 20240601;
  std::filesystem::path output_dir = "edet-out";
  int threads = 0;
  bool parallel_experiments = false;
  DataConfig data;
  ClassifierConfig classifier;
  PoolConfig pools;
  std::vector<OodSetConfig> ood;
  CorruptionConfig corruption;
  std::vector<attack::AttackConfig> attacks;
  SvmConfig svm;
  HighMspConfig high_msp;
  std::vector<ExperimentKind> experiments;

  /// Desk-scale defaults: 10 blob classes in 64 dimensions (8x8 images) on
  /// rank-32 class subspaces with spread 0.7, 500 train + 500 test per class,
  /// a 64-128-128-10 classifier trained for 100 epochs, two OoD sets, six
  /// corruption kinds and all four attacks, SVM lambda 0.1.
  static ExperimentConfig defaults();

  /// Throws ConfigError on invalid values or unknown names.
  void validate() const;

  /// Hash over every field that influences results (output_dir, threads and
  /// parallel_experiments are excluded).
  std::uint64_t hash() const;

  /// Hash over the fields the classifier depends on (seed, data, classifier).
  std::uint64_t classifier_hash() const;
  /// classifier_hash() plus pools, ood, corruption and attacks.
  std::uint64_t pools_hash() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults(); unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace edet::exp
