#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "edet/attack.hpp"
#include "edet/datagen.hpp"
#include "edet/error.hpp"
#include "edet/nnet.hpp"

using namespace edet;
using attack::AttackConfig;
using attack::Kind;

namespace {

struct Fixture {
  nnet::Classifier clf;
  std::vector<Sample> correct;
  std::vector<Sample> wrong;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    data::BlobParams p;
    p.per_class = 60;
    p.spread = 0.25;
    const auto all = data::gen_blobs(p);
    const auto split = data::split_indices(all, 0.5, 0.0, 1);
    const auto train = data::subset(all, split.train, Split::train);
    const auto test = data::subset(all, split.test, Split::test);
    const std::size_t dims[] = {64, 32, 10};
    nnet::TrainConfig c;
    c.epochs = 30;
    Fixture out{nnet::train_sgd(nnet::Classifier::initialize(dims, 1.0, 2), train, c), {}, {}};
    for (const auto* d : {&test, &train}) {
      for (const auto& s : d->samples) {
        (nnet::predict(out.clf, s.input) == s.label ? out.correct : out.wrong).push_back(s);
      }
    }
    return out;
  }();
  return f;
}

std::span<const Sample> first(std::size_t n) {
  const auto& c = fixture().correct;
  return {c.data(), std::min(n, c.size())};
}

double linf(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

AttackConfig cw(Kind kind, double kappa = 0.0) {
  AttackConfig c;
  c.kind = kind;
  c.kappa = kappa;
  return c;
}

}  // namespace

TEST(Fgsm, ZeroEpsilonIsIdentity) {
  const Sample& s = fixture().correct.front();
  const auto r = attack::fgsm(fixture().clf, s, 0.0);
  EXPECT_EQ(r.adversarial, s.input);
  EXPECT_FALSE(r.success);
}

TEST(Fgsm, FormulaForcedComponent) {
  // logits [1, x]: label 0 is predicted at x = 0.5 and d loss / dx > 0.
  const nnet::Classifier clf({nnet::DenseLayer{1, 2, {0.0, 1.0}, {1.0, 0.0}}}, 0);
  const auto r = attack::fgsm(clf, Sample{{0.5}, 0}, 0.01);
  EXPECT_DOUBLE_EQ(r.adversarial[0], 0.51);
}

TEST(Fgsm, MatchesSignFormulaAndBudget) {
  const auto& f = fixture();
  for (const Sample& s : first(50)) {
    const Vec g = nnet::input_gradient(f.clf, s.input, s.label);
    const auto r = attack::fgsm(f.clf, s, 0.1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double sg = g[i] > 0 ? 1.0 : (g[i] < 0 ? -1.0 : 0.0);
      EXPECT_EQ(r.adversarial[i], std::clamp(s.input[i] + 0.1 * sg, 0.0, 1.0));
    }
    EXPECT_LE(linf(r.adversarial, s.input), 0.1 + 1e-9);
    EXPECT_EQ(r.success, nnet::predict(f.clf, r.adversarial) != s.label);
  }
}

TEST(Fgsm, SucceedsOnMostSamplesAtDataScale) {
  const auto src = first(200);
  std::size_t ok = 0;
  for (const Sample& s : src) ok += attack::fgsm(fixture().clf, s, 0.25).success;
  EXPECT_GT(static_cast<double>(ok) / src.size(), 0.5);
}

TEST(Attacks, RejectMisclassifiedSource) {
  const auto& f = fixture();
  ASSERT_FALSE(f.wrong.empty());
  const Sample& s = f.wrong.front();
  EXPECT_THROW(attack::fgsm(f.clf, s, 0.1), PreconditionError);
  AttackConfig c;
  c.kind = Kind::pgd;
  EXPECT_THROW(attack::pgd(f.clf, s, c), PreconditionError);
  EXPECT_THROW(attack::cw_l2(f.clf, s, cw(Kind::cw_l2)), PreconditionError);
  EXPECT_THROW(attack::cw_linf(f.clf, s, cw(Kind::cw_linf)), PreconditionError);
  const Sample both[] = {f.correct.front(), s};
  EXPECT_THROW(attack::build_adversarial_pool(f.clf, both, c), PreconditionError);
}

TEST(Pgd, SingleStepEqualsFgsm) {
  const auto& f = fixture();
  for (const Sample& s : first(50)) {
    AttackConfig c;
    c.kind = Kind::pgd;
    c.epsilon = 0.15;
    c.alpha = 0.15;
    c.steps = 1;
    EXPECT_EQ(attack::pgd(f.clf, s, c).adversarial, attack::fgsm(f.clf, s, 0.15).adversarial);
  }
}

TEST(Pgd, ProjectionContract) {
  const auto& f = fixture();
  for (double eps : {0.02, 0.1, 0.3}) {
    AttackConfig c;
    c.kind = Kind::pgd;
    c.epsilon = eps;
    c.alpha = eps / 3.0;
    c.steps = 12;
    for (const Sample& s : first(40)) {
      const auto r = attack::pgd(f.clf, s, c);
      EXPECT_LE(linf(r.adversarial, s.input), eps + 1e-9);
      for (double v : r.adversarial) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    }
  }
}

TEST(Pgd, IteratedAtLeastAsStrongAsFgsm) {
  const auto& f = fixture();
  AttackConfig c;
  c.kind = Kind::pgd;
  c.epsilon = 0.1;
  c.alpha = 0.025;
  c.steps = 20;
  std::size_t pgd_ok = 0, fgsm_ok = 0;
  for (const Sample& s : first(200)) {
    pgd_ok += attack::pgd(f.clf, s, c).success;
    fgsm_ok += attack::fgsm(f.clf, s, 0.1).success;
  }
  EXPECT_GE(pgd_ok, fgsm_ok);
}

TEST(CarliniWagner, MarginInvariant) {
  const auto& f = fixture();
  for (double kappa : {0.0, 2.0}) {
    for (Kind k : {Kind::cw_l2, Kind::cw_linf}) {
      std::size_t successes = 0;
      for (const Sample& s : first(30)) {
        const auto r = attack::run(f.clf, s, cw(k, kappa));
        for (double v : r.adversarial) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
        }
        if (!r.success) continue;
        ++successes;
        const Vec z = nnet::forward(f.clf, r.adversarial).logits;
        EXPECT_GE(attack::logit_margin(z, s.label), kappa - 1e-6);
        EXPECT_NE(nnet::predict(f.clf, r.adversarial), s.label);
      }
      EXPECT_GT(successes, 0u);
    }
  }
}

TEST(CarliniWagner, ReportedNormsAreExact) {
  const auto& f = fixture();
  for (const Sample& s : first(20)) {
    const auto r = attack::cw_linf(f.clf, s, cw(Kind::cw_linf));
    EXPECT_EQ(r.linf, linf(r.adversarial, s.input));
    const auto q = attack::cw_l2(f.clf, s, cw(Kind::cw_l2));
    double ss = 0.0;
    for (std::size_t i = 0; i < s.input.size(); ++i) {
      ss += (q.adversarial[i] - s.input[i]) * (q.adversarial[i] - s.input[i]);
    }
    EXPECT_NEAR(q.l2, std::sqrt(ss), 1e-12);
  }
}

TEST(CarliniWagner, L2BelowFgsmAndLinfBelowL2) {
  const auto& f = fixture();
  const auto src = first(120);
  double l2_sum = 0.0, l2_linf_sum = 0.0, linf_sum = 0.0;
  std::size_t l2_n = 0, linf_n = 0;
  for (const Sample& s : src) {
    const auto a = attack::cw_l2(f.clf, s, cw(Kind::cw_l2));
    if (a.success) {
      l2_sum += a.l2;
      l2_linf_sum += a.linf;
      ++l2_n;
    }
    const auto b = attack::cw_linf(f.clf, s, cw(Kind::cw_linf));
    if (b.success) {
      linf_sum += b.linf;
      ++linf_n;
    }
  }
  ASSERT_GT(l2_n, 50u);
  ASSERT_GT(linf_n, 50u);
  EXPECT_LT(linf_sum / linf_n, l2_linf_sum / l2_n);

  // Smallest FGSM budget on a grid whose success rate matches C&W l2.
  const double target = static_cast<double>(l2_n) / src.size();
  for (double eps = 0.02; eps < 1.0; eps += 0.02) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Sample& s : src) {
      const auto r = attack::fgsm(f.clf, s, eps);
      if (r.success) {
        sum += r.l2;
        ++n;
      }
    }
    if (static_cast<double>(n) / src.size() >= target) {
      EXPECT_LT(l2_sum / l2_n, sum / n);
      return;
    }
  }
  FAIL() << "FGSM never matched the C&W success rate";
}

TEST(AdversarialPool, ZeroEpsilonIsEmpty) {
  AttackConfig c;
  c.epsilon = 0.0;
  const auto pool = attack::build_adversarial_pool(fixture().clf, first(30), c);
  EXPECT_TRUE(pool.samples.empty());
  EXPECT_EQ(pool.attempted, 30u);
}

TEST(AdversarialPool, RetainedSamplesAreMisclassifiedAndOrdered) {
  const auto& f = fixture();
  for (Kind k : {Kind::fgsm, Kind::pgd, Kind::cw_l2}) {
    AttackConfig c = cw(k);
    c.epsilon = 0.2;
    c.alpha = 0.05;
    c.cw_steps = 60;
    const auto src = first(40);
    const auto par = attack::build_adversarial_pool(f.clf, src, c, Execution::parallel);
    const auto ser = attack::build_adversarial_pool(f.clf, src, c, Execution::serial);
    EXPECT_EQ(par.samples, ser.samples);
    EXPECT_EQ(par.source_index, ser.source_index);
    EXPECT_EQ(par.kind, k);
    EXPECT_TRUE(std::is_sorted(par.source_index.begin(), par.source_index.end()));
    for (std::size_t i = 0; i < par.samples.size(); ++i) {
      EXPECT_NE(nnet::predict(f.clf, par.samples[i].input), par.samples[i].label);
      EXPECT_EQ(par.samples[i].label, src[par.source_index[i]].label);
    }
  }
}

TEST(AttackConfig, Validation) {
  AttackConfig c;
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AttackConfig{};
  c.kappa = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AttackConfig{};
  c.epsilon = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(attack::parse_kind("deepfool"), InputError);
  EXPECT_EQ(attack::parse_kind("cw-linf"), Kind::cw_linf);
}
