#include "edet/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "edet/error.hpp"
#include "edet/persistence.hpp"

namespace edet::exp {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json metrics_json(const eval::Metrics& m) {
  return {{"auroc", m.auroc}, {"aupr", m.aupr}, {"fpr95", m.fpr95}};
}

eval::Metrics metrics_from(const json& j) {
  return {j.at("auroc").get<double>(), j.at("aupr").get<double>(), j.at("fpr95").get<double>()};
}

std::string header_lines(const RunResults& r, const std::string& timestamp) {
  return "# generated: " + timestamp + "\n# master_seed: " + std::to_string(r.master_seed) +
         "\n# config_hash: " + hex(r.config_hash) + "\n";
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (c == ':' || c == '|' || c == '+') c = '_';
  }
  return s;
}

}  // namespace

json results_to_json(const RunResults& r) {
  json exps = json::array();
  for (const ExperimentResult& e : r.experiments) {
    json rows = json::array();
    for (const ResultRow& row : e.rows) {
      json folds = json::array();
      for (const eval::Metrics& m : row.report.folds) folds.push_back(metrics_json(m));
      rows.push_back({{"experiment", row.experiment},
                      {"family", row.family},
                      {"detector", row.detector},
                      {"mean", metrics_json(row.report.mean)},
                      {"stddev", metrics_json(row.report.stddev)},
                      {"folds", folds},
                      {"n_negative", row.report.n_negative},
                      {"n_positive", row.report.n_positive}});
    }
    json skips = json::array();
    for (const Skip& s : e.skips) {
      skips.push_back({{"experiment", s.experiment}, {"family", s.family}, {"reason", s.reason}});
    }
    json hists = json::array();
    for (const Histogram& h : e.histograms) {
      hists.push_back({{"experiment", h.experiment},
                       {"family", h.family},
                       {"edges", h.edges},
                       {"counts", h.counts}});
    }
    json rocs = json::array();
    for (const RocSeries& s : e.rocs) {
      json pts = json::array();
      for (const eval::RocPoint& p : s.points) pts.push_back({p.fpr, p.tpr, p.threshold});
      rocs.push_back({{"experiment", s.experiment}, {"detector", s.detector}, {"points", pts}});
    }
    exps.push_back({{"kind", std::string(to_string(e.kind))},
                    {"rows", rows},
                    {"skips", skips},
                    {"histograms", hists},
                    {"rocs", rocs},
                    {"notes", e.notes},
                    {"sizes", e.sizes}});
  }
  return {{"master_seed", r.master_seed},
          {"config_hash", hex(r.config_hash)},
          {"train_accuracy", r.train_accuracy},
          {"test_accuracy", r.test_accuracy},
          {"pool_sizes", r.pool_sizes},
          {"experiments", exps}};
}

RunResults results_from_json(const json& j) {
  try {
    RunResults r;
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.train_accuracy = j.at("train_accuracy").get<double>();
    r.test_accuracy = j.at("test_accuracy").get<double>();
    r.pool_sizes = j.at("pool_sizes").get<std::map<std::string, std::size_t>>();
    for (const json& e : j.at("experiments")) {
      ExperimentResult x;
      x.kind = parse_experiment(e.at("kind").get<std::string>());
      for (const json& row : e.at("rows")) {
        ResultRow rr;
        rr.experiment = row.at("experiment").get<std::string>();
        rr.family = row.at("family").get<std::string>();
        rr.detector = row.at("detector").get<std::string>();
        rr.report.mean = metrics_from(row.at("mean"));
        rr.report.stddev = metrics_from(row.at("stddev"));
        for (const json& m : row.at("folds")) rr.report.folds.push_back(metrics_from(m));
        rr.report.n_negative = row.at("n_negative").get<std::size_t>();
        rr.report.n_positive = row.at("n_positive").get<std::size_t>();
        x.rows.push_back(std::move(rr));
      }
      for (const json& s : e.at("skips")) {
        x.skips.push_back({s.at("experiment").get<std::string>(), s.at("family").get<std::string>(),
                           s.at("reason").get<std::string>()});
      }
      for (const json& h : e.at("histograms")) {
        x.histograms.push_back({h.at("experiment").get<std::string>(),
                                h.at("family").get<std::string>(),
                                h.at("edges").get<std::vector<double>>(),
                                h.at("counts").get<std::vector<std::size_t>>()});
      }
      for (const json& s : e.at("rocs")) {
        RocSeries rs{s.at("experiment").get<std::string>(), s.at("detector").get<std::string>(), {}};
        for (const json& p : s.at("points")) {
          rs.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
        }
        x.rocs.push_back(std::move(rs));
      }
      x.notes = e.at("notes").get<std::map<std::string, std::string>>();
      x.sizes = e.at("sizes").get<std::map<std::string, std::map<std::string, std::size_t>>>();
      r.experiments.push_back(std::move(x));
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed results document: ") + e.what());
  }
}

std::string results_csv(const RunResults& r, const std::string& timestamp) {
  std::string out = header_lines(r, timestamp);
  out += "experiment,family,detector,auroc,aupr,fpr95,auroc_std,aupr_std,fpr95_std,n_negative,"
         "n_positive\n";
  for (const ExperimentResult& e : r.experiments) {
    for (const ResultRow& row : e.rows) {
      const eval::MetricsReport& m = row.report;
      out += row.experiment + "," + row.family + "," + row.detector + "," + num(m.mean.auroc) +
             "," + num(m.mean.aupr) + "," + num(m.mean.fpr95) + "," + num(m.stddev.auroc) + "," +
             num(m.stddev.aupr) + "," + num(m.stddev.fpr95) + "," + std::to_string(m.n_negative) +
             "," + std::to_string(m.n_positive) + "\n";
    }
  }
  return out;
}

void emit_report(const RunResults& r, const std::filesystem::path& dir,
                 const std::string& timestamp) {
  if (r.experiments.empty()) throw InputError("no experiment results to report");
  std::error_code ec;
  std::filesystem::create_directories(dir / "plots", ec);
  if (ec) throw IoError("cannot create " + (dir / "plots").string() + ": " + ec.message());

  io::write_text_atomic(dir / "results.csv", results_csv(r, timestamp));

  json rows_per = json::object();
  json skips = json::array();
  json notes = json::object();
  std::size_t total = 0;
  for (const ExperimentResult& e : r.experiments) {
    const std::string name(to_string(e.kind));
    rows_per[name] = e.rows.size();
    total += e.rows.size();
    for (const Skip& s : e.skips) {
      skips.push_back({{"experiment", s.experiment}, {"family", s.family}, {"reason", s.reason}});
    }
    if (!e.notes.empty()) notes[name] = e.notes;
  }
  json headline = json::object();
  if (const ResultRow* s = r.find("combined", "combined", "svm")) {
    const ResultRow* m = r.find("combined", "combined", "msp");
    headline["combined_svm_auroc"] = s->report.mean.auroc;
    if (m) headline["combined_msp_auroc"] = m->report.mean.auroc;
  }
  const json summary{{"generated", timestamp},
                     {"master_seed", r.master_seed},
                     {"config_hash", hex(r.config_hash)},
                     {"classifier", {{"train_accuracy", r.train_accuracy},
                                     {"test_accuracy", r.test_accuracy}}},
                     {"pool_sizes", r.pool_sizes},
                     {"headline", headline},
                     {"rows_per_experiment", rows_per},
                     {"row_count", total},
                     {"skips", skips},
                     {"notes", notes}};
  io::write_text_atomic(dir / "summary.json", summary.dump(2) + "\n");
  io::write_text_atomic(dir / "results.json", results_to_json(r).dump(1) + "\n");

  std::map<std::string, std::string> hist_files;
  std::map<std::string, std::string> roc_files;
  for (const ExperimentResult& e : r.experiments) {
    for (const Histogram& h : e.histograms) {
      std::string& text = hist_files[h.experiment];
      if (text.empty()) text = header_lines(r, timestamp) + "family,bin_lo,bin_hi,count\n";
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        text += h.family + "," + num(h.edges[b]) + "," + num(h.edges[b + 1]) + "," +
                std::to_string(h.counts[b]) + "\n";
      }
    }
    for (const RocSeries& s : e.rocs) {
      std::string& text = roc_files[s.experiment];
      if (text.empty()) text = header_lines(r, timestamp) + "detector,fpr,tpr,threshold\n";
      for (const eval::RocPoint& p : s.points) {
        text += s.detector + "," + num(p.fpr) + "," + num(p.tpr) + "," + num(p.threshold) + "\n";
      }
    }
  }
  for (const auto& [name, text] : hist_files) {
    io::write_text_atomic(dir / "plots" / ("hist_" + safe_name(name) + ".csv"), text);
  }
  for (const auto& [name, text] : roc_files) {
    io::write_text_atomic(dir / "plots" / ("roc_" + safe_name(name) + ".csv"), text);
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace edet::exp
