#include "edet/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::exp {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 7> kExperimentNames = {{
    {ExperimentKind::per_set, "per-set"},
    {ExperimentKind::combined, "combined"},
    {ExperimentKind::separability, "separability"},
    {ExperimentKind::high_msp, "high-msp"},
    {ExperimentKind::leave_one_out, "leave-one-out"},
    {ExperimentKind::corrupted_correct, "corrupted-correct"},
    {ExperimentKind::pgd_only, "pgd-only"},
}};

void require_object(const json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
}

void reject_unknown(const json& j, std::string_view where,
                    std::initializer_list<std::string_view> known) {
  require_object(j, where);
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <typename Fn>
auto wrap(std::string_view where, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

json attack_to_json(const attack::AttackConfig& a) {
  json j{{"kind", std::string(attack::to_string(a.kind))}};
  switch (a.kind) {
    case attack::Kind::fgsm:
      j["epsilon"] = a.epsilon;
      break;
    case attack::Kind::pgd:
      j["epsilon"] = a.epsilon;
      j["alpha"] = a.alpha;
      j["steps"] = a.steps;
      break;
    case attack::Kind::cw_l2:
    case attack::Kind::cw_linf:
      j["kappa"] = a.kappa;
      j["cw_steps"] = a.cw_steps;
      j["cw_learning_rate"] = a.cw_learning_rate;
      j["cw_initial_c"] = a.cw_initial_c;
      j["cw_binary_search_steps"] = a.cw_binary_search_steps;
      j["cw_momentum"] = a.cw_momentum;
      if (a.kind == attack::Kind::cw_linf) j["cw_tau_decay"] = a.cw_tau_decay;
      break;
  }
  return j;
}

attack::AttackConfig attack_from_json(const json& j) {
  constexpr std::string_view where = "attacks[]";
  reject_unknown(j, where,
                 {"kind", "epsilon", "alpha", "steps", "kappa", "cw_steps", "cw_learning_rate",
                  "cw_initial_c", "cw_binary_search_steps", "cw_momentum", "cw_tau_decay"});
  if (!j.contains("kind")) throw ConfigError("attacks[]: missing 'kind'");
  attack::AttackConfig a;
  std::string kind;
  read(j, "kind", kind, where);
  a.kind = wrap(where, [&] { return attack::parse_kind(kind); });
  if (a.kind == attack::Kind::pgd) {
    a.epsilon = 0.25;
    a.alpha = a.epsilon / 4.0;
  }
  read(j, "epsilon", a.epsilon, where);
  if (a.kind == attack::Kind::fgsm) a.alpha = a.epsilon;
  read(j, "alpha", a.alpha, where);
  read(j, "steps", a.steps, where);
  read(j, "kappa", a.kappa, where);
  read(j, "cw_steps", a.cw_steps, where);
  read(j, "cw_learning_rate", a.cw_learning_rate, where);
  read(j, "cw_initial_c", a.cw_initial_c, where);
  read(j, "cw_binary_search_steps", a.cw_binary_search_steps, where);
  read(j, "cw_momentum", a.cw_momentum, where);
  read(j, "cw_tau_decay", a.cw_tau_decay, where);
  return a;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kExperimentNames) {
    if (k == kind) return name;
  }
  return "?";
}

ExperimentKind parse_experiment(std::string_view text) {
  for (const auto& [k, name] : kExperimentNames) {
    if (name == text) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(text) + "'");
}

std::vector<ExperimentKind> all_experiments() {
  std::vector<ExperimentKind> out;
  for (const auto& [k, _] : kExperimentNames) out.push_back(k);
  return out;
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.data.spread = 0.7;
  c.data.latent_dim = 32;
  c.classifier.hidden = {128, 128};
  c.classifier.train.learning_rate = 0.05;
  c.classifier.train.epochs = 100;
  c.classifier.train.batch_size = 32;
  c.ood = {OodSetConfig{data::OodMode::shifted_mean, 500, 1.0, 0.3, 0.3},
           OodSetConfig{data::OodMode::structured, 500, 1.0, 0.05, 0.3}};

  attack::AttackConfig fgsm;
  fgsm.kind = attack::Kind::fgsm;
  fgsm.epsilon = 0.3;
  fgsm.alpha = fgsm.epsilon;
  attack::AttackConfig pgd;
  pgd.kind = attack::Kind::pgd;
  pgd.epsilon = 0.25;
  pgd.alpha = pgd.epsilon / 4.0;
  pgd.steps = 20;
  attack::AttackConfig cwl2;
  cwl2.kind = attack::Kind::cw_l2;
  attack::AttackConfig cwlinf;
  cwlinf.kind = attack::Kind::cw_linf;
  c.attacks = {fgsm, pgd, cwl2, cwlinf};
  c.experiments = all_experiments();
  c.svm.params.lambda = 0.1;
  return c;
}

void ExperimentConfig::validate() const {
  if (data.source != "blobs" && data.source != "cifar") {
    throw ConfigError("data.source must be 'blobs' or 'cifar', got '" + data.source + "'");
  }
  if (data.source == "cifar" && data.cifar_dir.empty()) {
    throw ConfigError("data.cifar_dir is required when data.source is 'cifar'");
  }
  if (data.source == "blobs") {
    if (data.class_count < 2) throw ConfigError("data.class_count must be at least 2");
    if (data.dim < 2) throw ConfigError("data.dim must be at least 2");
    if (data.train_per_class == 0 || data.test_per_class == 0) {
      throw ConfigError("data.train_per_class and data.test_per_class must be positive");
    }
    if (!(data.spread > 0.0)) throw ConfigError("data.spread must be positive");
    if (data.geometry && data.geometry->size() != data.dim) {
      throw ConfigError("data.geometry has " + std::to_string(data.geometry->size()) +
                        " values per image but data.dim is " + std::to_string(data.dim));
    }
  }
  for (std::size_t h : classifier.hidden) {
    if (h == 0) throw ConfigError("classifier.hidden sizes must be positive");
  }
  if (classifier.hidden.empty()) throw ConfigError("classifier.hidden must list a layer");
  wrap("classifier", [&] { classifier.train.validate(); });
  if (pools.correct_fraction <= 0.0 || pools.corruption_fraction < 0.0 ||
      pools.correct_fraction + pools.corruption_fraction > 1.0) {
    throw ConfigError("pools fractions must be non-negative, correct_fraction positive, sum <= 1");
  }
  for (const OodSetConfig& o : ood) {
    if (!(o.spread > 0.0) || !(o.wide_spread > 0.0) || o.margin < 0.0) {
      throw ConfigError("ood: spreads must be positive and margin non-negative");
    }
  }
  for (int s : corruption.severities) {
    if (s < 1 || s > 5) throw ConfigError("corruption.severities must lie in 1..5");
  }
  for (corrupt::Kind k : corruption.kinds) {
    if (!corruption.table.params.count(k)) {
      throw ConfigError("corruption.table lacks '" + std::string(corrupt::to_string(k)) + "'");
    }
    if (corrupt::needs_geometry(k) && !data.geometry && data.source == "blobs") {
      throw ConfigError("corruption kind '" + std::string(corrupt::to_string(k)) +
                        "' needs data.geometry");
    }
  }
  std::set<attack::Kind> seen;
  for (const attack::AttackConfig& a : attacks) {
    wrap("attacks", [&] { a.validate(); });
    if (!seen.insert(a.kind).second) {
      throw ConfigError("attack '" + std::string(attack::to_string(a.kind)) + "' listed twice");
    }
  }
  if (!(svm.params.lambda > 0.0)) throw ConfigError("svm.lambda must be positive");
  if (svm.params.epochs == 0) throw ConfigError("svm.epochs must be positive");
  if (svm.folds < 2) throw ConfigError("svm.folds must be at least 2");
  if (!(high_msp.threshold >= 0.0)) throw ConfigError("high_msp.threshold must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0 (0 means all cores)");
}

std::uint64_t ExperimentConfig::hash() const {
  json j = to_json(*this);
  j.erase("output_dir");
  j.erase("threads");
  j.erase("parallel_experiments");
  return fnv1a64(j.dump());
}

namespace {

std::uint64_t hash_sections(const ExperimentConfig& c, std::initializer_list<const char*> keys) {
  const json full = to_json(c);
  json j = json::object();
  for (const char* k : keys) j[k] = full.at(k);
  return fnv1a64(j.dump());
}

}  // namespace

std::uint64_t ExperimentConfig::classifier_hash() const {
  return hash_sections(*this, {"master_seed", "data", "classifier"});
}

std::uint64_t ExperimentConfig::pools_hash() const {
  return hash_sections(*this, {"master_seed", "data", "classifier", "pools", "ood", "corruption",
                               "attacks"});
}

json to_json(const ExperimentConfig& c) {
  json data{{"source", c.data.source},
            {"cifar_dir", c.data.cifar_dir},
            {"class_count", c.data.class_count},
            {"dim", c.data.dim},
            {"train_per_class", c.data.train_per_class},
            {"test_per_class", c.data.test_per_class},
            {"spread", c.data.spread},
            {"latent_dim", c.data.latent_dim}};
  if (c.data.geometry) {
    data["geometry"] = {{"width", c.data.geometry->width},
                        {"height", c.data.geometry->height},
                        {"channels", c.data.geometry->channels}};
  } else {
    data["geometry"] = nullptr;
  }

  json classifier{{"hidden", c.classifier.hidden},
                  {"learning_rate", c.classifier.train.learning_rate},
                  {"epochs", c.classifier.train.epochs},
                  {"batch_size", c.classifier.train.batch_size},
                  {"init_scale", c.classifier.train.init_scale}};

  json ood = json::array();
  for (const OodSetConfig& o : c.ood) {
    ood.push_back({{"mode", std::string(data::to_string(o.mode))},
                   {"n", o.n},
                   {"margin", o.margin},
                   {"spread", o.spread},
                   {"wide_spread", o.wide_spread}});
  }

  json kinds = json::array();
  for (corrupt::Kind k : c.corruption.kinds) kinds.push_back(std::string(corrupt::to_string(k)));
  json table = json::object();
  for (const auto& [k, v] : c.corruption.table.params) {
    table[std::string(corrupt::to_string(k))] = v;
  }

  json attacks = json::array();
  for (const attack::AttackConfig& a : c.attacks) attacks.push_back(attack_to_json(a));

  json experiments = json::array();
  for (ExperimentKind e : c.experiments) experiments.push_back(std::string(to_string(e)));

  return json{
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir.string()},
      {"threads", c.threads},
      {"parallel_experiments", c.parallel_experiments},
      {"data", data},
      {"classifier", classifier},
      {"pools",
       {{"correct_fraction", c.pools.correct_fraction},
        {"corruption_fraction", c.pools.corruption_fraction}}},
      {"ood", ood},
      {"corruption",
       {{"kinds", kinds}, {"severities", c.corruption.severities}, {"table", table}}},
      {"attacks", attacks},
      {"svm",
       {{"solver", std::string(svm::to_string(c.svm.params.solver))},
        {"lambda", c.svm.params.lambda},
        {"epochs", c.svm.params.epochs},
        {"folds", c.svm.folds}}},
      {"high_msp",
       {{"threshold", c.high_msp.threshold},
        {"min_per_class", c.high_msp.min_per_class},
        {"fallback", c.high_msp.fallback}}},
      {"experiments", experiments},
  };
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c = ExperimentConfig::defaults();
  reject_unknown(j, "config",
                 {"master_seed", "output_dir", "threads", "parallel_experiments", "data",
                  "classifier", "pools", "ood", "corruption", "attacks", "svm", "high_msp",
                  "experiments"});
  read(j, "master_seed", c.master_seed, "config");
  std::string out = c.output_dir.string();
  read(j, "output_dir", out, "config");
  c.output_dir = out;
  read(j, "threads", c.threads, "config");
  read(j, "parallel_experiments", c.parallel_experiments, "config");

  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown(d, "data",
                   {"source", "cifar_dir", "class_count", "dim", "train_per_class",
                    "test_per_class", "spread", "latent_dim", "geometry"});
    read(d, "source", c.data.source, "data");
    read(d, "cifar_dir", c.data.cifar_dir, "data");
    read(d, "class_count", c.data.class_count, "data");
    read(d, "dim", c.data.dim, "data");
    read(d, "train_per_class", c.data.train_per_class, "data");
    read(d, "test_per_class", c.data.test_per_class, "data");
    read(d, "spread", c.data.spread, "data");
    read(d, "latent_dim", c.data.latent_dim, "data");
    if (d.contains("geometry")) {
      const json& g = d.at("geometry");
      if (g.is_null()) {
        c.data.geometry.reset();
      } else {
        reject_unknown(g, "data.geometry", {"width", "height", "channels"});
        corrupt::Geometry geo{0, 0, 1};
        read(g, "width", geo.width, "data.geometry");
        read(g, "height", geo.height, "data.geometry");
        read(g, "channels", geo.channels, "data.geometry");
        c.data.geometry = geo;
      }
    }
  }

  if (j.contains("classifier")) {
    const json& k = j.at("classifier");
    reject_unknown(k, "classifier",
                   {"hidden", "learning_rate", "epochs", "batch_size", "init_scale"});
    read(k, "hidden", c.classifier.hidden, "classifier");
    read(k, "learning_rate", c.classifier.train.learning_rate, "classifier");
    read(k, "epochs", c.classifier.train.epochs, "classifier");
    read(k, "batch_size", c.classifier.train.batch_size, "classifier");
    read(k, "init_scale", c.classifier.train.init_scale, "classifier");
  }

  if (j.contains("pools")) {
    const json& p = j.at("pools");
    reject_unknown(p, "pools", {"correct_fraction", "corruption_fraction"});
    read(p, "correct_fraction", c.pools.correct_fraction, "pools");
    read(p, "corruption_fraction", c.pools.corruption_fraction, "pools");
  }

  if (j.contains("ood")) {
    const json& arr = j.at("ood");
    if (!arr.is_array()) throw ConfigError("ood: expected an array");
    c.ood.clear();
    for (const json& o : arr) {
      reject_unknown(o, "ood[]", {"mode", "n", "margin", "spread", "wide_spread"});
      OodSetConfig s;
      std::string mode = std::string(data::to_string(s.mode));
      read(o, "mode", mode, "ood[]");
      s.mode = wrap("ood[]", [&] { return data::parse_ood_mode(mode); });
      read(o, "n", s.n, "ood[]");
      read(o, "margin", s.margin, "ood[]");
      read(o, "spread", s.spread, "ood[]");
      read(o, "wide_spread", s.wide_spread, "ood[]");
      c.ood.push_back(s);
    }
  }

  if (j.contains("corruption")) {
    const json& k = j.at("corruption");
    reject_unknown(k, "corruption", {"kinds", "severities", "table"});
    if (k.contains("kinds")) {
      std::vector<std::string> names;
      read(k, "kinds", names, "corruption");
      c.corruption.kinds.clear();
      for (const std::string& n : names) {
        c.corruption.kinds.push_back(wrap("corruption", [&] { return corrupt::parse_kind(n); }));
      }
    }
    read(k, "severities", c.corruption.severities, "corruption");
    if (k.contains("table")) {
      require_object(k.at("table"), "corruption.table");
      for (const auto& [name, values] : k.at("table").items()) {
        const corrupt::Kind kind = wrap("corruption.table", [&] {
          return corrupt::parse_kind(name);
        });
        std::array<double, 5> v{};
        try {
          v = values.get<std::array<double, 5>>();
        } catch (const json::exception& e) {
          throw ConfigError("corruption.table." + name + ": expected 5 numbers");
        }
        c.corruption.table.params[kind] = v;
      }
    }
  }

  if (j.contains("attacks")) {
    const json& arr = j.at("attacks");
    if (!arr.is_array()) throw ConfigError("attacks: expected an array");
    c.attacks.clear();
    for (const json& a : arr) c.attacks.push_back(attack_from_json(a));
  }

  if (j.contains("svm")) {
    const json& s = j.at("svm");
    reject_unknown(s, "svm", {"solver", "lambda", "epochs", "folds"});
    std::string solver(svm::to_string(c.svm.params.solver));
    read(s, "solver", solver, "svm");
    c.svm.params.solver = wrap("svm", [&] { return svm::parse_solver(solver); });
    read(s, "lambda", c.svm.params.lambda, "svm");
    read(s, "epochs", c.svm.params.epochs, "svm");
    read(s, "folds", c.svm.folds, "svm");
  }

  if (j.contains("high_msp")) {
    const json& h = j.at("high_msp");
    reject_unknown(h, "high_msp", {"threshold", "min_per_class", "fallback"});
    read(h, "threshold", c.high_msp.threshold, "high_msp");
    read(h, "min_per_class", c.high_msp.min_per_class, "high_msp");
    read(h, "fallback", c.high_msp.fallback, "high_msp");
  }

  if (j.contains("experiments")) {
    std::vector<std::string> names;
    read(j, "experiments", names, "config");
    c.experiments.clear();
    for (const std::string& n : names) c.experiments.push_back(parse_experiment(n));
  }

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace edet::exp
