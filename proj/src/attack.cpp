#include "edet/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "edet/error.hpp"

namespace edet::attack {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_correct(const nnet::Classifier& clf, const Sample& sample) {
  if (nnet::predict(clf, sample.input) != sample.label) {
    throw PreconditionError("attack source is already misclassified");
  }
}

AdversarialResult finish(const nnet::Classifier& clf, const Sample& sample, Vec adv,
                         std::size_t iterations) {
  AdversarialResult r;
  double l2 = 0.0;
  double linf = 0.0;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    const double d = std::abs(adv[i] - sample.input[i]);
    l2 += d * d;
    linf = std::max(linf, d);
  }
  r.l2 = std::sqrt(l2);
  r.linf = linf;
  r.success = nnet::predict(clf, adv) != sample.label;
  r.adversarial = std::move(adv);
  r.iterations = iterations;
  return r;
}

std::size_t runner_up(std::span<const double> logits, std::size_t label) {
  std::size_t best = label == 0 ? 1 : 0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j != label && logits[j] > logits[best]) best = j;
  }
  return best;
}

// Tanh reparameterisation: x = (tanh(w) + 1) / 2 stays inside [0, 1].
Vec to_tanh_space(std::span<const double> x) {
  Vec w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::atanh((2.0 * x[i] - 1.0) * (1.0 - 1e-6));
  return w;
}

void from_tanh_space(std::span<const double> w, Vec& x, Vec& dx_dw) {
  x.resize(w.size());
  dx_dw.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double t = std::tanh(w[i]);
    x[i] = std::clamp(0.5 * (t + 1.0), 0.0, 1.0);
    dx_dw[i] = 0.5 * (1.0 - t * t);
  }
}

// Gradient of (Z_label - Z_runner_up) with respect to x.
Vec margin_gradient(const nnet::Classifier& clf, std::span<const double> x,
                    std::span<const double> logits, std::size_t label) {
  Vec weights(clf.class_count(), 0.0);
  weights[label] = 1.0;
  weights[runner_up(logits, label)] -= 1.0;
  return nnet::logit_input_gradient(clf, x, weights);
}

bool margin_success(std::span<const double> logits, std::size_t label, double kappa) {
  return nnet::argmax(logits) != label && logit_margin(logits, label) >= kappa;
}

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::fgsm: return "fgsm";
    case Kind::pgd: return "pgd";
    case Kind::cw_l2: return "cw-l2";
    case Kind::cw_linf: return "cw-linf";
  }
  return "fgsm";
}

Kind parse_kind(std::string_view text) {
  if (text == "fgsm") return Kind::fgsm;
  if (text == "pgd") return Kind::pgd;
  if (text == "cw-l2") return Kind::cw_l2;
  if (text == "cw-linf") return Kind::cw_linf;
  throw InputError("unknown attack kind '" + std::string(text) + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack epsilon must be >= 0");
  if (steps < 1) throw ConfigError("attack steps must be >= 1");
  if (!(kappa >= 0.0)) throw ConfigError("C&W kappa must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("PGD alpha must be >= 0");
  if (cw_steps < 1) throw ConfigError("C&W steps must be >= 1");
  if (cw_binary_search_steps < 1) throw ConfigError("C&W binary search steps must be >= 1");
  if (!(cw_learning_rate > 0.0)) throw ConfigError("C&W learning rate must be > 0");
  if (!(cw_initial_c > 0.0)) throw ConfigError("C&W initial c must be > 0");
  if (!(cw_momentum >= 0.0 && cw_momentum < 1.0)) throw ConfigError("C&W momentum must be in [0, 1)");
  if (!(cw_tau_decay > 0.0 && cw_tau_decay < 1.0)) throw ConfigError("C&W tau decay must be in (0, 1)");
}

double logit_margin(std::span<const double> logits, std::size_t label) {
  return logits[runner_up(logits, label)] - logits[label];
}

AdversarialResult fgsm(const nnet::Classifier& clf, const Sample& sample, double epsilon) {
  require_correct(clf, sample);
  const Vec g = nnet::input_gradient(clf, sample.input, sample.label);
  Vec adv(sample.input.size());
  for (std::size_t i = 0; i < adv.size(); ++i) {
    adv[i] = std::clamp(sample.input[i] + epsilon * sign(g[i]), 0.0, 1.0);
  }
  return finish(clf, sample, std::move(adv), 1);
}

AdversarialResult pgd(const nnet::Classifier& clf, const Sample& sample,
                      const AttackConfig& config) {
  config.validate();
  require_correct(clf, sample);
  const Vec& x0 = sample.input;
  const double eps = config.epsilon;
  Vec x = x0;
  Vec best;
  bool best_wrong = false;
  double best_loss = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < config.steps; ++s) {
    const Vec g = nnet::input_gradient(clf, x, sample.label);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double t = x[i] + config.alpha * sign(g[i]);
      t = std::min(std::max(t, x0[i] - eps), x0[i] + eps);
      x[i] = std::clamp(t, 0.0, 1.0);
    }
    const bool wrong = nnet::predict(clf, x) != sample.label;
    const double l = nnet::loss(clf, x, sample.label);
    if ((wrong && !best_wrong) || (wrong == best_wrong && l > best_loss)) {
      best_wrong = wrong;
      best_loss = l;
      best = x;
    }
  }
  return finish(clf, sample, std::move(best), config.steps);
}

AdversarialResult cw_l2(const nnet::Classifier& clf, const Sample& sample,
                        const AttackConfig& config) {
  config.validate();
  require_correct(clf, sample);
  const Vec& x0 = sample.input;
  const std::size_t y = sample.label;
  const Vec w0 = to_tanh_space(x0);

  double lo = 0.0;
  double hi = 1e10;
  double c = config.cw_initial_c;
  double best_l2 = std::numeric_limits<double>::infinity();
  Vec best;
  std::size_t iterations = 0;
  Vec x, dx_dw;

  for (std::size_t bs = 0; bs < config.cw_binary_search_steps; ++bs) {
    Vec w = w0;
    Vec velocity(w.size(), 0.0);
    bool round_success = false;
    for (std::size_t step = 0; step <= config.cw_steps; ++step) {
      from_tanh_space(w, x, dx_dw);
      const Vec logits = nnet::forward(clf, x).logits;
      if (margin_success(logits, y, config.kappa)) {
        double l2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) l2 += (x[i] - x0[i]) * (x[i] - x0[i]);
        round_success = true;
        if (l2 < best_l2) {
          best_l2 = l2;
          best = x;
        }
      }
      if (step == config.cw_steps) break;
      Vec grad(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) grad[i] = 2.0 * (x[i] - x0[i]);
      if (logit_margin(logits, y) < config.kappa) {
        const Vec mg = margin_gradient(clf, x, logits, y);
        for (std::size_t i = 0; i < x.size(); ++i) grad[i] += c * mg[i];
      }
      for (std::size_t i = 0; i < w.size(); ++i) {
        velocity[i] = config.cw_momentum * velocity[i] - config.cw_learning_rate * grad[i] * dx_dw[i];
        w[i] += velocity[i];
      }
      ++iterations;
    }
    if (round_success) {
      hi = std::min(hi, c);
      c = 0.5 * (lo + hi);
    } else {
      lo = std::max(lo, c);
      c = hi < 1e9 ? 0.5 * (lo + hi) : c * 10.0;
    }
  }
  if (best.empty()) {
    AdversarialResult r = finish(clf, sample, x0, iterations);
    return r;
  }
  return finish(clf, sample, std::move(best), iterations);
}

AdversarialResult cw_linf(const nnet::Classifier& clf, const Sample& sample,
                          const AttackConfig& config) {
  config.validate();
  require_correct(clf, sample);
  const Vec& x0 = sample.input;
  const std::size_t y = sample.label;
  constexpr std::size_t kMaxRounds = 64;

  Vec w = to_tanh_space(x0);
  double tau = 1.0;
  double c = config.cw_initial_c;
  double best_linf = std::numeric_limits<double>::infinity();
  Vec best;
  std::size_t iterations = 0;
  Vec x, dx_dw;

  for (std::size_t round = 0; round < kMaxRounds && tau > 1.0 / 256.0; ++round) {
    bool found = false;
    double found_linf = 0.0;
    for (std::size_t attempt = 0; attempt < config.cw_binary_search_steps && !found; ++attempt) {
      Vec velocity(w.size(), 0.0);
      for (std::size_t step = 0; step <= config.cw_steps; ++step) {
        from_tanh_space(w, x, dx_dw);
        const Vec logits = nnet::forward(clf, x).logits;
        double linf = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) linf = std::max(linf, std::abs(x[i] - x0[i]));
        if (margin_success(logits, y, config.kappa)) {
          if (linf < best_linf) {
            best_linf = linf;
            best = x;
          }
          if (linf <= tau) {
            found = true;
            found_linf = linf;
            break;
          }
        }
        if (step == config.cw_steps) break;
        Vec grad(x.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double d = x[i] - x0[i];
          if (std::abs(d) > tau) grad[i] = sign(d);
        }
        if (logit_margin(logits, y) < config.kappa) {
          const Vec mg = margin_gradient(clf, x, logits, y);
          for (std::size_t i = 0; i < x.size(); ++i) grad[i] += c * mg[i];
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
          velocity[i] = config.cw_momentum * velocity[i] - config.cw_learning_rate * grad[i] * dx_dw[i];
          w[i] += velocity[i];
        }
        ++iterations;
      }
      if (!found) c *= 2.0;
    }
    if (!found) break;
    tau = std::min(tau, found_linf) * config.cw_tau_decay;
  }
  if (best.empty()) return finish(clf, sample, x0, iterations);
  return finish(clf, sample, std::move(best), iterations);
}

AdversarialResult run(const nnet::Classifier& clf, const Sample& sample,
                      const AttackConfig& config) {
  switch (config.kind) {
    case Kind::fgsm: return fgsm(clf, sample, config.epsilon);
    case Kind::pgd: return pgd(clf, sample, config);
    case Kind::cw_l2: return cw_l2(clf, sample, config);
    case Kind::cw_linf: return cw_linf(clf, sample, config);
  }
  throw InputError("unknown attack kind");
}

AdversarialPool build_adversarial_pool(const nnet::Classifier& clf,
                                       std::span<const Sample> sources,
                                       const AttackConfig& config, Execution exec) {
  config.validate();
  for (const Sample& s : sources) require_correct(clf, s);

  std::vector<AdversarialResult> results(sources.size());
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < sources.size(); ++i) results[i] = run(clf, sources[i], config);
  } else {
    for (std::size_t i = 0; i < sources.size(); ++i) results[i] = run(clf, sources[i], config);
  }

  AdversarialPool pool;
  pool.kind = config.kind;
  pool.config = config;
  pool.attempted = sources.size();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].success) continue;
    pool.samples.push_back({std::move(results[i].adversarial), sources[i].label});
    pool.source_index.push_back(i);
  }
  return pool;
}

}  // namespace edet::attack
