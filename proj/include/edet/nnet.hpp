#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "edet/common.hpp"
#include "edet/dataset.hpp"

namespace edet::nnet {

enum class Activation : std::uint32_t { relu = 0 };

/// Affine layer y = W x + b, W stored row-major as out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Vec weights;
  Vec bias;

  bool operator==(const DenseLayer&) const = default;
};

/// Fully connected classifier. Every layer except the last is followed by the
/// hidden activation; the last layer produces logits. The penultimate
/// representation is the post-activation output of the last hidden layer (or
/// the raw input for a single-layer model).
///
/// Immutable once built; concurrent forward/gradient calls are safe.
class Classifier {
 public:
  Classifier() = default;
  /// Throws ConfigError unless the layer shapes chain.
  Classifier(std::vector<DenseLayer> layers, std::uint64_t seed,
             Activation activation = Activation::relu);

  /// Uniform init in [-s, s], s = init_scale / sqrt(fan_in); biases zero.
  static Classifier initialize(std::span<const std::size_t> dims, double init_scale,
                               std::uint64_t seed);

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t penultimate_dim() const { return layers_.back().in; }
  std::size_t class_count() const { return layers_.back().out; }
  std::size_t depth() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::uint64_t seed() const { return seed_; }
  Activation activation() const { return activation_; }

  bool operator==(const Classifier&) const = default;

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t seed_ = 0;
  Activation activation_ = Activation::relu;
};

struct ForwardPass {
  Vec penultimate;
  Vec logits;
};

ForwardPass forward(const Classifier& clf, std::span<const double> input);

/// Max-subtracted softmax.
Vec softmax(std::span<const double> logits);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

std::size_t predict(const Classifier& clf, std::span<const double> input);

/// Softmax cross-entropy, -log softmax(logits)[label], via log-sum-exp.
double loss(const Classifier& clf, std::span<const double> input, std::size_t label);

/// d loss / d input by backpropagation.
Vec input_gradient(const Classifier& clf, std::span<const double> input,
                   std::size_t label);

/// Gradient with respect to the input of dot(logit_weights, logits(input)).
Vec logit_input_gradient(const Classifier& clf, std::span<const double> input,
                         std::span<const double> logit_weights);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double init_scale = 1.0;

  /// learning_rate > 0, batch_size >= 1. Epoch count is checked by callers
  /// that need at least one pass; zero epochs is a valid no-op for train_sgd.
  void validate() const;
};

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;
};

double mean_loss(const Classifier& clf, const LabeledDataset& data);
double accuracy(const Classifier& clf, const LabeledDataset& data);

/// Minibatch SGD on softmax cross-entropy with seeded per-epoch shuffling.
/// Returns the parameters with the lowest mean training loss among the
/// initial state and every epoch end, so the result never has a higher mean
/// loss than `init`. Single-threaded and deterministic given config.seed.
Classifier train_sgd(const Classifier& init, const LabeledDataset& data,
                     const TrainConfig& config, TrainReport* report = nullptr);

}  // namespace edet::nnet
