// Serial reference paths against their OpenMP counterparts on shared inputs.

#include <benchmark/benchmark.h>

#include "edet/attack.hpp"
#include "edet/corrupt.hpp"
#include "edet/datagen.hpp"
#include "edet/eval.hpp"
#include "edet/feature.hpp"
#include "edet/nnet.hpp"

using namespace edet;

namespace {

struct Setup {
  LabeledDataset test;
  nnet::Classifier clf;
  std::vector<Sample> correct;
  feature::DetectionDataset detection;
};

const Setup& setup() {
  static const Setup s = [] {
    data::BlobParams p;
    p.per_class = 100;
    p.spread = 0.3;
    const LabeledDataset all = data::gen_blobs(p);
    const auto split = data::split_indices(all, 0.5, 0.0, 1);
    const LabeledDataset train = data::subset(all, split.train, Split::train);
    Setup out;
    out.test = data::subset(all, split.test, Split::test);
    const std::size_t dims[] = {64, 64, 32, 10};
    nnet::TrainConfig tc;
    tc.epochs = 10;
    out.clf = nnet::train_sgd(nnet::Classifier::initialize(dims, 1.0, 3), train, tc);
    std::vector<feature::Pool> pools(2);
    pools[0].family = feature::Family::correct;
    pools[1].family = feature::Family::misclassified;
    for (const Sample& x : out.test.samples) {
      const bool ok = nnet::predict(out.clf, x.input) == x.label;
      if (ok) out.correct.push_back(x);
      feature::Pool& pool = pools[ok ? 0 : 1];
      pool.inputs.push_back(x.input);
      pool.source_ids.push_back(pool.size());
      pool.labels.push_back(x.label);
    }
    for (std::size_t i = 0; i < 100; ++i) {
      pools[1].inputs.push_back(out.test.samples[i].input);
      for (double& v : pools[1].inputs.back()) v = 1.0 - v;
      pools[1].source_ids.push_back(1000 + i);
      pools[1].labels.push_back(0);
    }
    out.detection = feature::balance(feature::assemble(out.clf, pools), 5);
    return out;
  }();
  return s;
}

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void BM_FeatureBatch(benchmark::State& state) {
  const Setup& s = setup();
  std::vector<Vec> inputs;
  for (const Sample& x : s.test.samples) inputs.push_back(x.input);
  for (auto _ : state) {
    benchmark::DoNotOptimize(feature::extract_features_batch(s.clf, inputs, mode(state)));
  }
}

void BM_CorruptedPool(benchmark::State& state) {
  const Setup& s = setup();
  std::vector<std::size_t> idx(50);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const LabeledDataset clean = data::subset(s.test, idx, Split::test);
  const std::vector<corrupt::Kind> kinds(corrupt::kAllKinds.begin(), corrupt::kAllKinds.end());
  const std::vector<int> severities = {1, 3, 5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(corrupt::build_corrupted_pool(
        s.clf, clean, kinds, severities, 9, corrupt::Geometry{8, 8, 1},
        corrupt::SeverityTable::defaults(), mode(state)));
  }
}

void BM_AdversarialPool(benchmark::State& state) {
  const Setup& s = setup();
  const std::vector<Sample> src(s.correct.begin(), s.correct.begin() + 40);
  attack::AttackConfig ac;
  ac.kind = attack::Kind::pgd;
  ac.epsilon = 0.2;
  ac.alpha = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(attack::build_adversarial_pool(s.clf, src, ac, mode(state)));
  }
}

void BM_CrossValidate(benchmark::State& state) {
  const Setup& s = setup();
  svm::SvmParams params;
  params.lambda = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::cross_validate(s.detection, 5, params, 1, mode(state)));
  }
}

}  // namespace

BENCHMARK(BM_FeatureBatch)->Arg(0)->Arg(1)->ArgName("parallel");
BENCHMARK(BM_CorruptedPool)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AdversarialPool)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CrossValidate)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
