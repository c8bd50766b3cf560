#include "edet/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::all: return "all";
  }
  return "all";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  if (text == "all") return Split::all;
  throw InputError("unknown split '" + std::string(text) + "'");
}

}  // namespace edet

namespace edet::nnet {

namespace {

void affine(const DenseLayer& layer, std::span<const double> x, Vec& out) {
  out.assign(layer.out, 0.0);
  for (std::size_t r = 0; r < layer.out; ++r) {
    const double* row = layer.weights.data() + r * layer.in;
    double s = layer.bias[r];
    for (std::size_t c = 0; c < layer.in; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

// Post-activation outputs of every layer; acts[0] is the input, acts.back()
// the logits.
struct Trace {
  std::vector<Vec> acts;
};

Trace run(const Classifier& clf, std::span<const double> input) {
  if (input.size() != clf.input_dim()) {
    throw ConfigError("input dimension " + std::to_string(input.size()) +
                      " does not match classifier input dimension " +
                      std::to_string(clf.input_dim()));
  }
  const auto& layers = clf.layers();
  Trace t;
  t.acts.reserve(layers.size() + 1);
  t.acts.emplace_back(input.begin(), input.end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Vec z;
    affine(layers[i], t.acts.back(), z);
    if (i + 1 < layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    t.acts.push_back(std::move(z));
  }
  return t;
}

// Given dL/dlogits, walks back through the layers. When `grads` is non-null,
// parameter gradients are accumulated into it (same shapes as the layers).
Vec backward(const Classifier& clf, const Trace& t, Vec delta,
             std::vector<DenseLayer>* grads) {
  const auto& layers = clf.layers();
  for (std::size_t i = layers.size(); i-- > 0;) {
    const DenseLayer& layer = layers[i];
    const Vec& below = t.acts[i];
    if (grads) {
      DenseLayer& g = (*grads)[i];
      for (std::size_t r = 0; r < layer.out; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        g.bias[r] += d;
        double* grow = g.weights.data() + r * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c) grow[c] += d * below[c];
      }
    }
    Vec next(layer.in, 0.0);
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = layer.weights.data() + r * layer.in;
      for (std::size_t c = 0; c < layer.in; ++c) next[c] += row[c] * d;
    }
    if (i > 0) {
      // below is relu output; derivative is 1 where it is positive
      for (std::size_t c = 0; c < layer.in; ++c) {
        if (!(below[c] > 0.0)) next[c] = 0.0;
      }
    }
    delta = std::move(next);
  }
  return delta;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Classifier::Classifier(std::vector<DenseLayer> layers, std::uint64_t seed,
                       Activation activation)
    : layers_(std::move(layers)), seed_(seed), activation_(activation) {
  if (layers_.empty()) throw ConfigError("classifier needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    if (l.in == 0 || l.out == 0) throw ConfigError("layer with zero dimension");
    if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
      throw ConfigError("layer " + std::to_string(i) + " parameter count mismatch");
    }
    if (i > 0 && layers_[i - 1].out != l.in) {
      throw ConfigError("layer " + std::to_string(i) + " input dimension " +
                        std::to_string(l.in) + " does not chain with previous output " +
                        std::to_string(layers_[i - 1].out));
    }
  }
}

Classifier Classifier::initialize(std::span<const std::size_t> dims, double init_scale,
                                  std::uint64_t seed) {
  if (dims.size() < 2) throw ConfigError("need at least input and output dims");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    l.in = dims[i];
    l.out = dims[i + 1];
    const double s = init_scale / std::sqrt(static_cast<double>(l.in));
    l.weights.resize(l.in * l.out);
    for (double& w : l.weights) w = rng.uniform(-s, s);
    l.bias.assign(l.out, 0.0);
    layers.push_back(std::move(l));
  }
  return Classifier(std::move(layers), seed);
}

ForwardPass forward(const Classifier& clf, std::span<const double> input) {
  Trace t = run(clf, input);
  ForwardPass out;
  out.logits = std::move(t.acts.back());
  out.penultimate = std::move(t.acts[t.acts.size() - 2]);
  return out;
}

Vec softmax(std::span<const double> logits) {
  Vec p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double s = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t predict(const Classifier& clf, std::span<const double> input) {
  return argmax(forward(clf, input).logits);
}

double loss(const Classifier& clf, std::span<const double> input, std::size_t label) {
  const Vec logits = forward(clf, input).logits;
  if (label >= logits.size()) throw InputError("label out of range");
  return log_sum_exp(logits) - logits[label];
}

Vec input_gradient(const Classifier& clf, std::span<const double> input,
                   std::size_t label) {
  if (label >= clf.class_count()) throw InputError("label out of range");
  Trace t = run(clf, input);
  Vec delta = softmax(t.acts.back());
  delta[label] -= 1.0;
  return backward(clf, t, std::move(delta), nullptr);
}

Vec logit_input_gradient(const Classifier& clf, std::span<const double> input,
                         std::span<const double> logit_weights) {
  if (logit_weights.size() != clf.class_count()) {
    throw ConfigError("logit weight vector has wrong dimension");
  }
  Trace t = run(clf, input);
  return backward(clf, t, Vec(logit_weights.begin(), logit_weights.end()), nullptr);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(init_scale > 0.0)) throw ConfigError("init scale must be > 0");
}

double mean_loss(const Classifier& clf, const LabeledDataset& data) {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (const Sample& x : data.samples) s += loss(clf, x.input, x.label);
  return s / static_cast<double>(data.size());
}

double accuracy(const Classifier& clf, const LabeledDataset& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Sample& x : data.samples) hits += predict(clf, x.input) == x.label;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

Classifier train_sgd(const Classifier& init, const LabeledDataset& data,
                     const TrainConfig& config, TrainReport* report) {
  config.validate();
  if (data.empty()) throw InputError("training set is empty");
  for (const Sample& s : data.samples) {
    if (s.label >= init.class_count()) throw InputError("training label out of range");
    if (s.input.size() != init.input_dim()) {
      throw ConfigError("training sample dimension does not match classifier");
    }
  }

  const double initial = mean_loss(init, data);
  TrainReport local;
  local.initial_loss = initial;

  Classifier best = init;
  double best_loss = initial;

  std::vector<DenseLayer> params = init.layers();
  std::vector<DenseLayer> grads = params;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (auto& g : grads) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      const Classifier current(params, init.seed(), init.activation());
      for (std::size_t k = start; k < stop; ++k) {
        const Sample& s = data.samples[order[k]];
        Trace t = run(current, s.input);
        Vec delta = softmax(t.acts.back());
        delta[s.label] -= 1.0;
        backward(current, t, std::move(delta), &grads);
      }
      const double step = config.learning_rate / static_cast<double>(stop - start);
      for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t j = 0; j < params[i].weights.size(); ++j) {
          params[i].weights[j] -= step * grads[i].weights[j];
        }
        for (std::size_t j = 0; j < params[i].bias.size(); ++j) {
          params[i].bias[j] -= step * grads[i].bias[j];
        }
      }
    }
    Classifier snapshot(params, init.seed(), init.activation());
    const double l = mean_loss(snapshot, data);
    local.epoch_loss.push_back(l);
    if (std::isfinite(l) && l <= best_loss) {
      best_loss = l;
      best = std::move(snapshot);
    }
  }
  local.final_loss = best_loss;
  if (report) *report = std::move(local);
  return best;
}

}  // namespace edet::nnet
