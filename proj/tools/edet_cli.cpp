#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edet/config.hpp"
#include "edet/error.hpp"
#include "edet/experiments.hpp"
#include "edet/nnet.hpp"
#include "edet/report.hpp"
#include "edet/workbench.hpp"

namespace {

using namespace edet;

int exit_code(std::string_view kind) {
  constexpr std::pair<std::string_view, int> codes[] = {
      {"config-error", 2},          {"input-error", 3},        {"format-error", 4},
      {"io-error", 5},              {"unsupported-version", 6}, {"checksum-mismatch", 7},
      {"kind-mismatch", 8},         {"precondition-violated", 9}, {"undefined-metric", 10},
  };
  for (const auto& [k, c] : codes) {
    if (k == kind) return c;
  }
  return 1;
}

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out;
  int threads = -1;
  std::string cifar;
  bool quiet = false;
};

exp::ExperimentConfig resolve(const Options& o) {
  exp::ExperimentConfig c =
      o.config.empty() ? exp::ExperimentConfig::defaults() : exp::load_config(o.config);
  if (o.has_seed) c.master_seed = o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.threads >= 0) c.threads = o.threads;
  if (!o.cifar.empty()) {
    c.data.source = "cifar";
    c.data.cifar_dir = o.cifar;
    c.data.geometry = corrupt::Geometry{32, 32, 3};
  }
  c.validate();
  if (c.threads > 0) set_thread_count(c.threads);
  return c;
}

exp::Logger logger(const Options& o) {
  if (o.quiet) return {};
  return [](std::string_view msg) { std::clog << "[edet] " << msg << '\n'; };
}

int cmd_train(const Options& o) {
  const exp::ExperimentConfig c = resolve(o);
  const exp::Datasets data = exp::make_datasets(c);
  const nnet::Classifier clf = exp::obtain_classifier(c, data, logger(o));
  std::cout << "classifier " << exp::classifier_path(c).string() << "\n"
            << "train accuracy " << nnet::accuracy(clf, data.train) << "\n"
            << "test accuracy " << nnet::accuracy(clf, data.test) << "\n";
  return 0;
}

int cmd_genpools(const Options& o) {
  const exp::ExperimentConfig c = resolve(o);
  const exp::Datasets data = exp::make_datasets(c);
  const nnet::Classifier clf = exp::obtain_classifier(c, data, logger(o));
  const exp::PoolSet pools = exp::obtain_pools(c, clf, data, logger(o));
  for (const auto& [fam, pool] : pools.pools) {
    std::cout << feature::to_string(fam) << " " << pool.size() << "\n";
  }
  return 0;
}

int cmd_run(const Options& o, const std::vector<std::string>& names) {
  exp::ExperimentConfig c = resolve(o);
  std::vector<exp::ExperimentKind> kinds;
  for (const std::string& n : names) {
    if (n == "all") {
      kinds = exp::all_experiments();
      break;
    }
    kinds.push_back(exp::parse_experiment(n));
  }
  const exp::Workbench wb = exp::build_workbench(c, logger(o));
  const exp::RunResults results = exp::run_all(wb, kinds, logger(o));
  exp::emit_report(results, c.output_dir, exp::utc_timestamp());
  for (const exp::ExperimentResult& e : results.experiments) {
    for (const exp::Skip& s : e.skips) {
      std::clog << "[edet] skipped " << s.experiment << "/" << s.family << ": " << s.reason << '\n';
    }
  }
  std::cout << exp::results_csv(results, "-");
  return 0;
}

int cmd_report(const Options& o) {
  const exp::ExperimentConfig c = resolve(o);
  const auto path = c.output_dir / "results.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " (run experiments first)");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const exp::RunResults results = exp::results_from_json(j);
  exp::emit_report(results, c.output_dir, exp::utc_timestamp());
  std::cout << exp::results_csv(results, "-");
  return 0;
}

int cmd_config(const Options& o) {
  std::cout << exp::to_json(resolve(o)).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Erroneous-input detection experiments"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file (defaults when omitted)");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&o](const std::uint64_t& s) {
          o.seed = s;
          o.has_seed = true;
        },
        "Master seed override");
    sub->add_option("--out", o.out, "Output directory override");
    sub->add_option("--threads", o.threads, "OpenMP threads (0 = all cores)");
    sub->add_option("--cifar", o.cifar, "Use the CIFAR-10 binary batches in this directory");
    sub->add_flag("-q,--quiet", o.quiet, "No progress messages");
  };

  auto* train = app.add_subcommand("train", "Train (or load cached) base classifier");
  auto* genpools = app.add_subcommand("genpools", "Build correct and erroneous input pools");
  std::vector<std::string> names;
  auto* run = app.add_subcommand("run", "Run experiments and write the report");
  run->add_option("experiments", names,
                  "per-set combined separability high-msp leave-one-out corrupted-correct "
                  "pgd-only, or all (default: config list)");
  auto* report = app.add_subcommand("report", "Rewrite report files from results.json");
  auto* config = app.add_subcommand("config", "Print the resolved config as JSON");
  for (CLI::App* sub : {train, genpools, run, report, config}) common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return cmd_train(o);
    if (*genpools) return cmd_genpools(o);
    if (*run) return cmd_run(o, names);
    if (*report) return cmd_report(o);
    if (*config) return cmd_config(o);
  } catch (const edet::Error& e) {
    std::cerr << "error [" << e.kind() << "]: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
