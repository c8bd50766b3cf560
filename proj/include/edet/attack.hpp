#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "edet/common.hpp"
#include "edet/dataset.hpp"
#include "edet/nnet.hpp"

namespace edet::attack {

enum class Kind { fgsm, pgd, cw_l2, cw_linf };

std::string_view to_string(Kind kind);
Kind parse_kind(std::string_view text);

struct AttackConfig {
  Kind kind = Kind::fgsm;
  double epsilon = 0.1;   // l-inf budget for fgsm / pgd
  double alpha = 0.1;     // pgd step size
  std::size_t steps = 20; // pgd iterations
  double kappa = 0.0;     // C&W logit margin
  std::size_t cw_steps = 200;
  double cw_learning_rate = 0.05;
  double cw_initial_c = 1.0;
  std::size_t cw_binary_search_steps = 5;
  double cw_momentum = 0.9;
  /// Shrink factor applied to the l-inf threshold after each success.
  double cw_tau_decay = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdversarialResult {
  Vec adversarial;
  bool success = false;
  double l2 = 0.0;
  double linf = 0.0;
  std::size_t iterations = 0;
};

/// adv = clamp(x + eps * sign(grad_x loss), 0, 1) with sign(0) = 0.
/// Every attack throws PreconditionError when the classifier already
/// mispredicts `sample`.
AdversarialResult fgsm(const nnet::Classifier& clf, const Sample& sample, double epsilon);

/// `steps` iterations of x <- clamp(proj_eps(x + alpha * sign(grad)), 0, 1)
/// from a zero random start. Returns the highest-loss misclassified iterate,
/// or the highest-loss iterate when none is misclassified.
AdversarialResult pgd(const nnet::Classifier& clf, const Sample& sample,
                      const AttackConfig& config);

/// Untargeted Carlini-Wagner l2: minimize ||delta||^2 + c * f(x + delta) with
/// f = max(Z_y - max_{j != y} Z_j, -kappa) in tanh space, momentum gradient
/// descent, binary search over c. Returns the lowest-distortion iterate that
/// is misclassified with margin >= kappa, or the unmodified input with
/// success = false.
AdversarialResult cw_l2(const nnet::Classifier& clf, const Sample& sample,
                        const AttackConfig& config);

/// Carlini-Wagner l-inf: c * f(x + delta) + sum_i max(|delta_i| - tau, 0)
/// with tau shrinking after every success and c doubling after a failure.
AdversarialResult cw_linf(const nnet::Classifier& clf, const Sample& sample,
                          const AttackConfig& config);

AdversarialResult run(const nnet::Classifier& clf, const Sample& sample,
                      const AttackConfig& config);

/// (max_{j != label} logit_j) - logit_label
double logit_margin(std::span<const double> logits, std::size_t label);

struct AdversarialPool {
  Kind kind = Kind::fgsm;
  AttackConfig config;
  std::vector<Sample> samples;
  /// Position in the source list of each retained sample.
  std::vector<std::size_t> source_index;
  std::size_t attempted = 0;
};

/// Runs the attack on every source and keeps only successes, in source order.
/// Throws PreconditionError if any source is misclassified.
AdversarialPool build_adversarial_pool(const nnet::Classifier& clf,
                                       std::span<const Sample> sources,
                                       const AttackConfig& config,
                                       Execution exec = Execution::parallel);

}  // namespace edet::attack
