#include "edet/workbench.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "edet/attack.hpp"
#include "edet/corrupt.hpp"
#include "edet/datagen.hpp"
#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::exp {

using feature::Family;

namespace {

constexpr std::uint64_t kAttackVariantBase = 64;

Family attack_family(attack::Kind kind) {
  switch (kind) {
    case attack::Kind::fgsm: return Family::fgsm;
    case attack::Kind::pgd: return Family::pgd;
    case attack::Kind::cw_l2: return Family::cw_l2;
    case attack::Kind::cw_linf: return Family::cw_linf;
  }
  return Family::fgsm;
}

std::uint64_t corruption_variant(corrupt::Kind kind, int severity) {
  return 1 + static_cast<std::uint64_t>(kind) * 5 + static_cast<std::uint64_t>(severity - 1);
}

io::ArtifactInfo info_for(const ExperimentConfig& config, std::uint64_t hash,
                          const nlohmann::json& meta) {
  return {config.master_seed, hash, meta.dump()};
}

// Unreadable or damaged artifacts count as absent and get rebuilt.
bool cached(const std::filesystem::path& path, const ExperimentConfig& config,
            std::uint64_t hash, const Logger& log) {
  if (!std::filesystem::exists(path)) return false;
  try {
    const io::ArtifactHeader h = io::read_header(path);
    return h.config_hash == hash && h.master_seed == config.master_seed;
  } catch (const Error& e) {
    if (log) log("ignoring damaged artifact " + path.string() + " [" + std::string(e.kind()) + "]: " + e.what());
    return false;
  }
}

void add_member(feature::Pool& pool, Vec input, std::uint64_t id, std::size_t label) {
  pool.inputs.push_back(std::move(input));
  pool.source_ids.push_back(id);
  pool.labels.push_back(label);
}

}  // namespace

std::uint64_t make_source_id(std::uint64_t variant, std::uint64_t index) {
  return (variant << 32) | (index & 0xffffffffULL);
}
std::uint64_t source_index_of(std::uint64_t id) { return id & 0xffffffffULL; }
std::uint64_t variant_of(std::uint64_t id) { return id >> 32; }

Datasets make_datasets(const ExperimentConfig& config) {
  Datasets out;
  if (config.data.source == "cifar") {
    data::CifarSplits s = data::load_cifar10_dir(config.data.cifar_dir);
    out.train = std::move(s.train);
    out.test = std::move(s.test);
    out.class_centers = data::class_means(out.train);
    return out;
  }
  data::BlobParams p;
  p.class_count = config.data.class_count;
  p.dim = config.data.dim;
  p.per_class = config.data.train_per_class + config.data.test_per_class;
  p.spread = config.data.spread;
  p.latent_dim = config.data.latent_dim;
  p.seed = derive_seed(config.master_seed, "data");
  const LabeledDataset all = data::gen_blobs(p);
  const double train_fraction =
      static_cast<double>(config.data.train_per_class) / static_cast<double>(p.per_class);
  const data::SplitIndices split =
      data::split_indices(all, train_fraction, 0.0, derive_seed(config.master_seed, "split"));
  out.train = data::subset(all, split.train, Split::train);
  out.test = data::subset(all, split.test, Split::test);
  out.class_centers = data::blob_centers(p.class_count, p.dim, p.seed);
  return out;
}

nnet::Classifier train_classifier(const ExperimentConfig& config, const LabeledDataset& train,
                                  nnet::TrainReport* report) {
  std::vector<std::size_t> dims;
  dims.push_back(train.input_dim());
  for (std::size_t h : config.classifier.hidden) dims.push_back(h);
  dims.push_back(train.class_count);
  nnet::TrainConfig tc = config.classifier.train;
  tc.seed = derive_seed(config.master_seed, "classifier-sgd");
  const nnet::Classifier init = nnet::Classifier::initialize(
      dims, tc.init_scale, derive_seed(config.master_seed, "classifier-init"));
  return nnet::train_sgd(init, train, tc, report);
}

const feature::Pool* PoolSet::find(Family family) const {
  const auto it = pools.find(family);
  return it == pools.end() ? nullptr : &it->second;
}

PoolSet build_pools(const ExperimentConfig& config, const nnet::Classifier& clf,
                    const Datasets& data, Execution exec) {
  PoolSet out;
  out.test_size = data.test.size();
  const std::uint64_t seed = config.master_seed;

  std::vector<std::size_t> right;
  feature::Pool& wrong = out.pools[Family::misclassified];
  wrong.family = Family::misclassified;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const Sample& s = data.test.samples[i];
    if (nnet::predict(clf, s.input) == s.label) {
      right.push_back(i);
    } else {
      add_member(wrong, s.input, make_source_id(0, i), s.label);
    }
  }
  out.test_correct = right.size();

  // Partition the correctly classified test inputs into disjoint sources.
  Rng rng(derive_seed(seed, "pool-partition"));
  shuffle(right, rng);
  const auto n = static_cast<double>(right.size());
  const auto n_correct = static_cast<std::size_t>(std::floor(n * config.pools.correct_fraction));
  const auto n_corrupt =
      static_cast<std::size_t>(std::floor(n * config.pools.corruption_fraction));
  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> part(right.begin() + static_cast<std::ptrdiff_t>(begin),
                                  right.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(part.begin(), part.end());
    return part;
  };

  feature::Pool& correct = out.pools[Family::correct];
  correct.family = Family::correct;
  for (std::size_t i : take(0, n_correct)) {
    add_member(correct, data.test.samples[i].input, make_source_id(0, i),
               data.test.samples[i].label);
  }

  const std::vector<std::size_t> corrupt_src = take(n_correct, n_corrupt);
  if (!corrupt_src.empty() && !config.corruption.kinds.empty() &&
      !config.corruption.severities.empty()) {
    const LabeledDataset clean = data::subset(data.test, corrupt_src, Split::test);
    const corrupt::CorruptedPool cp = corrupt::build_corrupted_pool(
        clf, clean, config.corruption.kinds, config.corruption.severities,
        derive_seed(seed, "corruption"), config.data.geometry, config.corruption.table, exec);
    feature::Pool& cw = out.pools[Family::corrupted];
    cw.family = Family::corrupted;
    feature::Pool& cr = out.pools[Family::corrupted_correct];
    cr.family = Family::corrupted_correct;
    auto fill = [&](feature::Pool& pool, const std::vector<corrupt::CorruptedSample>& items) {
      for (const corrupt::CorruptedSample& c : items) {
        const std::size_t test_index = corrupt_src[c.source_index];
        add_member(pool, c.sample.input,
                   make_source_id(corruption_variant(c.spec.kind, c.spec.severity), test_index),
                   c.sample.label);
      }
    };
    fill(cw, cp.wrong);
    fill(cr, cp.right);
  }

  const std::size_t rest = right.size() - n_correct - n_corrupt;
  const std::size_t n_attacks = config.attacks.size();
  for (std::size_t a = 0; a < n_attacks; ++a) {
    const attack::AttackConfig& base = config.attacks[a];
    const std::size_t begin = n_correct + n_corrupt + a * rest / n_attacks;
    const std::size_t end = n_correct + n_corrupt + (a + 1) * rest / n_attacks;
    const std::vector<std::size_t> src = take(begin, end - begin);
    std::vector<Sample> sources;
    sources.reserve(src.size());
    for (std::size_t i : src) sources.push_back(data.test.samples[i]);
    attack::AttackConfig ac = base;
    ac.seed = derive_seed(seed, std::string("attack:") + std::string(attack::to_string(ac.kind)));
    const attack::AdversarialPool ap = attack::build_adversarial_pool(clf, sources, ac, exec);
    const Family fam = attack_family(ac.kind);
    feature::Pool& pool = out.pools[fam];
    pool.family = fam;
    for (std::size_t j = 0; j < ap.samples.size(); ++j) {
      add_member(pool, ap.samples[j].input,
                 make_source_id(kAttackVariantBase + static_cast<std::uint64_t>(ac.kind),
                                src[ap.source_index[j]]),
                 ap.samples[j].label);
    }
    out.attack_attempted[std::string(attack::to_string(ac.kind))] = ap.attempted;
  }

  if (!config.ood.empty()) {
    feature::Pool& ood = out.pools[Family::ood];
    ood.family = Family::ood;
    std::uint64_t running = 0;
    for (std::size_t k = 0; k < config.ood.size(); ++k) {
      const OodSetConfig& o = config.ood[k];
      data::OodParams p;
      p.dim = data.test.input_dim();
      p.n = o.n;
      p.mode = o.mode;
      p.seed = derive_seed(seed, "ood", k);
      p.reference_centers = data.class_centers;
      p.margin = o.margin;
      p.spread = o.spread;
      p.wide_spread = o.wide_spread;
      for (Vec& x : data::gen_ood(p).samples) {
        add_member(ood, std::move(x), make_source_id(kOodVariant, running++), 0);
      }
    }
    ood.labels.clear();
  }

  // Clean sources of the correct pool never feed an erroneous pool.
  std::set<std::uint64_t> correct_src;
  for (std::uint64_t id : correct.source_ids) correct_src.insert(source_index_of(id));
  for (const auto& [fam, pool] : out.pools) {
    if (fam == Family::correct || fam == Family::ood) continue;
    for (std::uint64_t id : pool.source_ids) {
      if (correct_src.count(source_index_of(id))) {
        throw PreconditionError("pool '" + std::string(feature::to_string(fam)) +
                                "' shares a source input with the correct pool");
      }
    }
  }
  return out;
}

feature::DetectionDataset Workbench::select(std::span<const Family> negatives,
                                            std::span<const Family> positives) const {
  return feature::relabel(features, negatives, positives);
}

std::filesystem::path classifier_path(const ExperimentConfig& config) {
  return config.output_dir / "artifacts" / "classifier.edet";
}

std::filesystem::path pools_dir(const ExperimentConfig& config) {
  return config.output_dir / "artifacts" / "pools";
}

nnet::Classifier obtain_classifier(const ExperimentConfig& config, const Datasets& data,
                                   const Logger& log) {
  const auto path = classifier_path(config);
  if (cached(path, config, config.classifier_hash(), log)) {
    if (log) log("loading cached classifier " + path.string());
    return io::load_classifier(path).value;
  }
  if (log) log("training classifier");
  nnet::TrainReport report;
  nnet::Classifier clf = train_classifier(config, data.train, &report);
  std::filesystem::create_directories(path.parent_path());
  io::save_classifier(clf, path,
                      info_for(config, config.classifier_hash(), {{"initial_loss", report.initial_loss},
                                        {"final_loss", report.final_loss}}));
  return clf;
}

void save_pools(const ExperimentConfig& config, const PoolSet& pools) {
  const auto dir = pools_dir(config);
  std::filesystem::create_directories(dir);
  for (const auto& [fam, pool] : pools.pools) {
    io::SamplePool sp;
    sp.name = std::string(feature::to_string(fam));
    sp.source_ids = pool.source_ids;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      sp.samples.push_back({pool.inputs[i], pool.labels.empty() ? 0 : pool.labels[i]});
    }
    nlohmann::json meta{{"family", sp.name},
                        {"test_size", pools.test_size},
                        {"test_correct", pools.test_correct},
                        {"labelled", !pool.labels.empty()}};
    if (const auto it = pools.attack_attempted.find(
            std::string(sp.name.rfind("adversarial:", 0) == 0 ? sp.name.substr(12) : ""));
        it != pools.attack_attempted.end()) {
      meta["attempted"] = it->second;
    }
    std::string file = sp.name;
    std::replace(file.begin(), file.end(), ':', '-');
    io::save_sample_pool(sp, dir / (file + ".edet"), info_for(config, config.pools_hash(), meta));
  }
}

PoolSet obtain_pools(const ExperimentConfig& config, const nnet::Classifier& clf,
                     const Datasets& data, const Logger& log, Execution exec) {
  const auto dir = pools_dir(config);
  const auto index = dir / "index.json";
  if (cached(dir / "correct.edet", config, config.pools_hash(), log) && std::filesystem::exists(index)) {
    if (log) log("loading cached pools from " + dir.string());
    PoolSet out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() != ".edet") continue;
      const auto loaded = io::load_sample_pool(entry.path());
      if (loaded.header.config_hash != config.pools_hash()) {
        throw PreconditionError("stale pool file " + entry.path().string());
      }
      const auto meta = nlohmann::json::parse(loaded.header.metadata);
      const Family fam = feature::parse_family(loaded.value.name);
      feature::Pool& pool = out.pools[fam];
      pool.family = fam;
      pool.source_ids = loaded.value.source_ids;
      const bool labelled = meta.value("labelled", true);
      for (const Sample& s : loaded.value.samples) {
        pool.inputs.push_back(s.input);
        if (labelled) pool.labels.push_back(s.label);
      }
      out.test_size = meta.value("test_size", std::size_t{0});
      out.test_correct = meta.value("test_correct", std::size_t{0});
      if (meta.contains("attempted")) {
        out.attack_attempted[loaded.value.name.substr(12)] = meta["attempted"].get<std::size_t>();
      }
    }
    return out;
  }
  if (log) log("building erroneous pools");
  PoolSet pools = build_pools(config, clf, data, exec);
  save_pools(config, pools);
  nlohmann::json idx = nlohmann::json::object();
  for (const auto& [fam, pool] : pools.pools) idx[std::string(feature::to_string(fam))] = pool.size();
  io::write_text_atomic(index, idx.dump(2) + "\n");
  return pools;
}

Workbench build_workbench(const ExperimentConfig& config, const Logger& log, Execution exec) {
  Workbench wb;
  wb.config = config;
  const Datasets data = make_datasets(config);
  wb.classifier = obtain_classifier(config, data, log);
  wb.train_accuracy = nnet::accuracy(wb.classifier, data.train);
  wb.test_accuracy = nnet::accuracy(wb.classifier, data.test);
  if (log) {
    log("classifier accuracy: train " + std::to_string(wb.train_accuracy) + ", test " +
        std::to_string(wb.test_accuracy));
  }
  wb.pools = obtain_pools(config, wb.classifier, data, log, exec);
  std::vector<feature::Pool> all;
  for (const auto& [fam, pool] : wb.pools.pools) {
    if (log) log("pool " + std::string(feature::to_string(fam)) + ": " + std::to_string(pool.size()));
    all.push_back(pool);
  }
  wb.features = feature::assemble(wb.classifier, all, exec);

  std::set<std::uint64_t> ids;
  for (const auto& r : wb.features.records) {
    if (!ids.insert(r.source_id).second) {
      throw PreconditionError("duplicate record id " + std::to_string(r.source_id));
    }
  }
  return wb;
}

}  // namespace edet::exp
