#include "edet/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <sstream>

#include "edet/error.hpp"
#include "edet/rng.hpp"

namespace edet::exp {

using feature::DetectionDataset;
using feature::Family;

namespace {

constexpr std::size_t kHistogramBins = 40;

std::string name_of(Family f) { return std::string(feature::to_string(f)); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

std::size_t pool_size(const Workbench& wb, Family f) {
  const feature::Pool* p = wb.pools.find(f);
  return p ? p->size() : 0;
}

std::uint64_t tag_seed(const Workbench& wb, std::string_view what, std::string_view tag) {
  return derive_seed(wb.config.master_seed, std::string(what) + ":" + std::string(tag));
}

void check_unique_ids(const DetectionDataset& data, std::string_view where) {
  std::set<std::uint64_t> ids;
  for (const auto& r : data.records) {
    if (!ids.insert(r.source_id).second) {
      throw PreconditionError(std::string(where) + ": record id " + std::to_string(r.source_id) +
                              " appears twice");
    }
  }
}

void check_disjoint(const DetectionDataset& train, const DetectionDataset& test,
                    std::string_view where) {
  std::set<std::uint64_t> ids;
  for (const auto& r : train.records) ids.insert(r.source_id);
  for (const auto& r : test.records) {
    if (ids.count(r.source_id)) {
      throw PreconditionError(std::string(where) + ": evaluation record " +
                              std::to_string(r.source_id) + " was used for training");
    }
  }
}

std::string too_small(const DetectionDataset& data, std::size_t need) {
  const std::size_t n0 = data.count(0);
  const std::size_t n1 = data.count(1);
  if (n0 >= need && n1 >= need) return {};
  return "too few records after balancing (" + std::to_string(n0) + " negative, " +
         std::to_string(n1) + " positive; need " + std::to_string(need) + " each)";
}

Histogram histogram(std::string experiment, std::string family, std::span<const double> values,
                    double lo, double hi) {
  Histogram h{std::move(experiment), std::move(family), {}, std::vector<std::size_t>(kHistogramBins, 0)};
  if (!(hi > lo)) hi = lo + 1.0;
  for (std::size_t b = 0; b <= kHistogramBins; ++b) {
    h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / kHistogramBins);
  }
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * kHistogramBins);
    h.counts[std::min(b, kHistogramBins - 1)]++;
  }
  return h;
}

struct CvOutcome {
  eval::CvResult cv;
  bool ran = false;
};

/// Cross-validates `data` and appends svm and msp rows (or a skip).
CvOutcome evaluate(const Workbench& wb, const DetectionDataset& data, ExperimentResult& out,
                   const std::string& family, const std::string& tag, Execution exec) {
  const std::string exp_name(to_string(out.kind));
  const std::size_t folds = wb.config.svm.folds;
  if (const std::string why = too_small(data, folds); !why.empty()) {
    out.skips.push_back({exp_name, family, why});
    return {};
  }
  check_unique_ids(data, exp_name + "/" + family);
  svm::SvmParams params = wb.config.svm.params;
  params.seed = tag_seed(wb, "svm", tag);
  CvOutcome o;
  o.cv = eval::cross_validate(data, folds, params, tag_seed(wb, "folds", tag), exec);
  o.ran = true;
  out.rows.push_back({exp_name, family, "svm", o.cv.svm});
  out.rows.push_back({exp_name, family, "msp", o.cv.msp});
  out.sizes[family] = data.manifest.post_balance_counts;
  return o;
}

bool require_pool(const Workbench& wb, Family f, ExperimentResult& out, const std::string& row) {
  if (pool_size(wb, f) > 0) return true;
  out.skips.push_back({std::string(to_string(out.kind)), row,
                       "empty pool '" + name_of(f) + "'"});
  return false;
}

void add_plots(const DetectionDataset& data, const eval::CvResult& cv,
               const std::string& experiment, ExperimentResult& out) {
  const auto [lo_it, hi_it] = std::minmax_element(cv.oof_scores.begin(), cv.oof_scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::map<Family, Vec> by_family;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    by_family[data.records[i].family].push_back(cv.oof_scores[i]);
  }
  for (const auto& [fam, scores] : by_family) {
    out.histograms.push_back(histogram(experiment, name_of(fam), scores, lo, hi));
  }
  const std::vector<int> labels = eval::labels_of(data);
  out.rocs.push_back({experiment, "svm", eval::roc_curve(cv.oof_scores, labels)});
  out.rocs.push_back({experiment, "msp", eval::roc_curve(eval::msp_scores(data), labels)});
}

const std::array<Family, 7> kPerSetFamilies = {Family::misclassified, Family::ood,
                                               Family::corrupted,     Family::fgsm,
                                               Family::pgd,           Family::cw_l2,
                                               Family::cw_linf};

}  // namespace

const ResultRow* RunResults::find(std::string_view experiment, std::string_view family,
                                  std::string_view detector) const {
  for (const ExperimentResult& e : experiments) {
    for (const ResultRow& r : e.rows) {
      if (r.experiment == experiment && r.family == family && r.detector == detector) return &r;
    }
  }
  return nullptr;
}

std::vector<Family> erroneous_families(bool include_pgd) {
  std::vector<Family> out;
  for (Family f : kPerSetFamilies) {
    if (f != Family::pgd || include_pgd) out.push_back(f);
  }
  return out;
}

DetectionDataset balanced_set(const Workbench& wb, std::span<const Family> negatives,
                              std::span<const Family> positives, std::string_view tag) {
  return feature::balance(wb.select(negatives, positives), tag_seed(wb, "balance", tag));
}

std::optional<double> high_msp_threshold(const DetectionDataset& data, double configured,
                                         std::size_t min_per_class, bool fallback) {
  if (configured >= 1.0) return std::nullopt;
  std::array<Vec, 2> msp;
  for (const auto& r : data.records) msp[r.label == 1 ? 1 : 0].push_back(feature::record_msp(data, r));
  const std::size_t need = std::max<std::size_t>(min_per_class, 1);
  auto above = [](const Vec& v, double t) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [t](double m) { return m > t; }));
  };
  if (above(msp[0], configured) >= need && above(msp[1], configured) >= need) return configured;
  if (!fallback || msp[0].size() < need || msp[1].size() < need) return std::nullopt;
  double limit = 1.0;
  for (Vec& v : msp) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(need - 1), v.end(),
                     std::greater<>());
    limit = std::min(limit, v[need - 1]);
  }
  return std::nextafter(limit, 0.0);
}

ExperimentResult run_per_set(const Workbench& wb, Execution exec) {
  ExperimentResult out;
  out.kind = ExperimentKind::per_set;
  const std::array<Family, 1> neg = {Family::correct};
  for (Family f : kPerSetFamilies) {
    const std::string row = name_of(f);
    if (!require_pool(wb, f, out, row)) continue;
    const std::array<Family, 1> pos = {f};
    evaluate(wb, balanced_set(wb, neg, pos, "per-set:" + row), out, row, "per-set:" + row, exec);
  }
  return out;
}

ExperimentResult run_combined(const Workbench& wb, Execution exec) {
  ExperimentResult out;
  out.kind = ExperimentKind::combined;
  const std::array<Family, 1> neg = {Family::correct};
  for (bool with_pgd : {false, true}) {
    const std::string row = with_pgd ? "combined+pgd" : "combined";
    std::vector<Family> pos;
    for (Family f : erroneous_families(with_pgd)) {
      if (pool_size(wb, f) > 0) pos.push_back(f);
    }
    if (pos.empty()) {
      out.skips.push_back({"combined", row, "every erroneous pool is empty"});
      continue;
    }
    const DetectionDataset data = balanced_set(wb, neg, pos, "combined:" + row);
    const CvOutcome o = evaluate(wb, data, out, row, "combined:" + row, exec);
    if (o.ran) add_plots(data, o.cv, row, out);
  }
  return out;
}

ExperimentResult run_separability(const Workbench& wb, Execution exec) {
  ExperimentResult out;
  out.kind = ExperimentKind::separability;
  const std::vector<Family> fams = erroneous_families(false);
  for (std::size_t a = 0; a < fams.size(); ++a) {
    for (std::size_t b = a + 1; b < fams.size(); ++b) {
      const std::string row = name_of(fams[a]) + "|" + name_of(fams[b]);
      if (!require_pool(wb, fams[a], out, row) || !require_pool(wb, fams[b], out, row)) continue;
      const std::array<Family, 1> base = {fams[a]};
      const std::array<Family, 1> second = {fams[b]};
      evaluate(wb, balanced_set(wb, base, second, "separability:" + row), out, row,
               "separability:" + row, exec);
    }
  }
  return out;
}

ExperimentResult run_high_msp(const Workbench& wb, Execution exec) {
  ExperimentResult out;
  out.kind = ExperimentKind::high_msp;
  const std::string row = "combined";
  const std::array<Family, 1> neg = {Family::correct};
  const std::vector<Family> pos = erroneous_families(false);
  const DetectionDataset all = wb.select(neg, pos);
  const HighMspConfig& h = wb.config.high_msp;
  const std::optional<double> t = high_msp_threshold(all, h.threshold, h.min_per_class, h.fallback);
  if (!t) {
    out.skips.push_back({"high-msp", row, "insufficient data"});
    out.notes["threshold"] = "none";
    return out;
  }
  const DetectionDataset data = feature::filter_high_msp(all, *t, tag_seed(wb, "balance", "high-msp"));
  out.notes["threshold"] = fmt(*t);
  out.notes["threshold_source"] = *t == h.threshold ? "configured" : "fallback";
  if (data.count(0) == 0 || data.count(1) == 0) {
    out.skips.push_back({"high-msp", row, "insufficient data"});
    return out;
  }
  evaluate(wb, data, out, row, "high-msp", exec);
  return out;
}

ExperimentResult run_leave_one_out(const Workbench& wb, Execution exec) {
  ExperimentResult out;
  out.kind = ExperimentKind::leave_one_out;
  const std::size_t folds = wb.config.svm.folds;
  std::vector<Family> fams;
  for (Family f : erroneous_families(false)) {
    if (pool_size(wb, f) >= folds) {
      fams.push_back(f);
    } else {
      out.skips.push_back({"leave-one-out", name_of(f), "fewer records than folds"});
    }
  }
  if (fams.size() < 2) {
    out.skips.push_back({"leave-one-out", "*", "needs at least two erroneous families"});
    return out;
  }

  const std::array<Family, 1> neg = {Family::correct};
  const DetectionDataset all = wb.select(neg, fams);
  check_unique_ids(all, "leave-one-out");

  // Every family's records are dealt round-robin into folds after a shuffle.
  std::vector<std::size_t> fold_of(all.records.size(), 0);
  {
    std::map<Family, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < all.records.size(); ++i) members[all.records[i].family].push_back(i);
    for (auto& [fam, idx] : members) {
      Rng rng(tag_seed(wb, "loo-folds", name_of(fam)));
      shuffle(idx, rng);
      for (std::size_t j = 0; j < idx.size(); ++j) fold_of[idx[j]] = j % folds;
    }
  }
  auto gather = [&](auto&& keep) {
    DetectionDataset d;
    d.penultimate_dim = all.penultimate_dim;
    d.class_count = all.class_count;
    for (std::size_t i = 0; i < all.records.size(); ++i) {
      if (keep(i, all.records[i].family)) d.records.push_back(all.records[i]);
    }
    return d;
  };
  auto all_indices = [](const DetectionDataset& d) {
    std::vector<std::size_t> idx(d.records.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
  };

  struct FamilyRun {
    std::vector<eval::Metrics> out_m, in_m, msp_m;
    std::size_t n_neg = 0, n_pos = 0;
    std::string skip;
  };
  std::vector<FamilyRun> runs(fams.size() * folds);
  auto run_one = [&](std::size_t job) {
    const Family left = fams[job / folds];
    const std::size_t f = job % folds;
    const std::string tag = "leave-one-out:" + name_of(left) + ":" + std::to_string(f);
    const DetectionDataset test = feature::balance(
        gather([&](std::size_t i, Family fam) {
          return fold_of[i] == f && (fam == Family::correct || fam == left);
        }),
        tag_seed(wb, "balance-test", tag));
    const DetectionDataset train_out = feature::balance(
        gather([&](std::size_t i, Family fam) { return fold_of[i] != f && fam != left; }),
        tag_seed(wb, "balance-out", tag));
    const DetectionDataset train_in = feature::balance(
        gather([&](std::size_t i, Family) { return fold_of[i] != f; }),
        tag_seed(wb, "balance-in", tag));
    FamilyRun& r = runs[job];
    if (test.count(0) == 0 || test.count(1) == 0) {
      r.skip = "empty test fold";
      return;
    }
    for (const auto& rec : train_out.records) {
      if (rec.family == left) throw PreconditionError("left-out family reached training");
    }
    check_disjoint(train_out, test, tag);
    check_disjoint(train_in, test, tag);
    svm::SvmParams params = wb.config.svm.params;
    params.seed = tag_seed(wb, "svm", tag);
    const svm::SvmModel m_out = svm::fit(train_out, all_indices(train_out), params);
    const svm::SvmModel m_in = svm::fit(train_in, all_indices(train_in), params);
    Vec s_out, s_in;
    for (const auto& rec : test.records) {
      s_out.push_back(svm::decision(m_out, rec.features));
      s_in.push_back(svm::decision(m_in, rec.features));
    }
    const std::vector<int> labels = eval::labels_of(test);
    r.out_m.push_back(eval::compute_metrics(s_out, labels));
    r.in_m.push_back(eval::compute_metrics(s_in, labels));
    r.msp_m.push_back(eval::compute_metrics(eval::msp_scores(test), labels));
    r.n_neg = test.count(0);
    r.n_pos = test.count(1);
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t job = 0; job < runs.size(); ++job) run_one(job);
  } else {
    for (std::size_t job = 0; job < runs.size(); ++job) run_one(job);
  }

  double worst_drop = -1.0;
  std::string worst;
  for (std::size_t k = 0; k < fams.size(); ++k) {
    const std::string row = name_of(fams[k]);
    std::vector<eval::Metrics> om, im, mm;
    std::size_t n_neg = 0, n_pos = 0;
    std::string skip;
    for (std::size_t f = 0; f < folds; ++f) {
      const FamilyRun& r = runs[k * folds + f];
      if (!r.skip.empty()) skip = r.skip;
      om.insert(om.end(), r.out_m.begin(), r.out_m.end());
      im.insert(im.end(), r.in_m.begin(), r.in_m.end());
      mm.insert(mm.end(), r.msp_m.begin(), r.msp_m.end());
      n_neg += r.n_neg;
      n_pos += r.n_pos;
    }
    if (!skip.empty()) {
      out.skips.push_back({"leave-one-out", row, skip});
      continue;
    }
    const eval::MetricsReport ro = eval::summarize(std::move(om), n_neg, n_pos);
    const eval::MetricsReport ri = eval::summarize(std::move(im), n_neg, n_pos);
    out.rows.push_back({"leave-one-out", row, "svm-leave-out", ro});
    out.rows.push_back({"leave-one-out", row, "svm-in-training", ri});
    out.rows.push_back({"leave-one-out", row, "msp", eval::summarize(std::move(mm), n_neg, n_pos)});
    out.sizes[row] = {{"test_negative", n_neg}, {"test_positive", n_pos}};
    const double drop = ri.mean.auroc - ro.mean.auroc;
    if (drop > worst_drop) {
      worst_drop = drop;
      worst = row;
    }
  }
  if (!worst.empty()) {
    out.notes["largest_drop_family"] = worst;
    out.notes["largest_drop_auroc"] = fmt(worst_drop);
  }
  return out;
}

ExperimentResult run_corrupted_correct(const Workbench& wb, Execution exec) {
  ExperimentResult out;
  out.kind = ExperimentKind::corrupted_correct;
  if (!require_pool(wb, Family::corrupted_correct, out, "*")) return out;
  const std::array<Family, 1> base = {Family::corrupted_correct};
  for (Family f : kPerSetFamilies) {
    const std::string row = name_of(f);
    if (!require_pool(wb, f, out, row)) continue;
    const std::array<Family, 1> pos = {f};
    evaluate(wb, balanced_set(wb, base, pos, "corrupted-correct:" + row), out, row,
             "corrupted-correct:" + row, exec);
  }
  return out;
}

ExperimentResult run_pgd_only(const Workbench& wb, Execution exec) {
  ExperimentResult out;
  out.kind = ExperimentKind::pgd_only;
  const std::string row = name_of(Family::pgd);
  if (!require_pool(wb, Family::pgd, out, row)) return out;
  const std::array<Family, 1> neg = {Family::correct};
  const std::array<Family, 1> pos = {Family::pgd};
  const DetectionDataset data = balanced_set(wb, neg, pos, "pgd-only");
  const CvOutcome o = evaluate(wb, data, out, row, "pgd-only", exec);
  if (o.ran) add_plots(data, o.cv, "pgd-only", out);
  return out;
}

ExperimentResult run_experiment(const Workbench& wb, ExperimentKind kind, Execution exec) {
  switch (kind) {
    case ExperimentKind::per_set: return run_per_set(wb, exec);
    case ExperimentKind::combined: return run_combined(wb, exec);
    case ExperimentKind::separability: return run_separability(wb, exec);
    case ExperimentKind::high_msp: return run_high_msp(wb, exec);
    case ExperimentKind::leave_one_out: return run_leave_one_out(wb, exec);
    case ExperimentKind::corrupted_correct: return run_corrupted_correct(wb, exec);
    case ExperimentKind::pgd_only: return run_pgd_only(wb, exec);
  }
  throw ConfigError("unknown experiment kind");
}

RunResults run_all(const Workbench& wb, std::vector<ExperimentKind> kinds, const Logger& log) {
  if (kinds.empty()) kinds = wb.config.experiments;
  RunResults res;
  res.master_seed = wb.config.master_seed;
  res.config_hash = wb.config.hash();
  res.train_accuracy = wb.train_accuracy;
  res.test_accuracy = wb.test_accuracy;
  for (const auto& [fam, pool] : wb.pools.pools) res.pool_sizes[name_of(fam)] = pool.size();
  res.experiments.resize(kinds.size());

  if (wb.config.parallel_experiments) {
    std::vector<std::exception_ptr> errors(kinds.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      try {
        res.experiments[i] = run_experiment(wb, kinds[i], Execution::serial);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      if (log) log("running " + std::string(to_string(kinds[i])));
      res.experiments[i] = run_experiment(wb, kinds[i], Execution::parallel);
    }
  }
  return res;
}

}  // namespace edet::exp
