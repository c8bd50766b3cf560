#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "edet/experiments.hpp"

namespace edet::exp {

/// Lossless JSON form of a run, read back by the `report` command.
nlohmann::json results_to_json(const RunResults& results);
RunResults results_from_json(const nlohmann::json& j);

/// CSV text: three '#' header lines (timestamp, master seed, config hash),
/// a column header and one row per (experiment, family, detector).
std::string results_csv(const RunResults& results, const std::string& timestamp);

/// Writes into `dir`:
///   results.csv            results_csv()
///   summary.json           headline numbers, per-experiment row counts, skips, notes
///   results.json           results_to_json()
///   plots/hist_<exp>.csv   decision-score histograms, one series per family
///   plots/roc_<exp>.csv    ROC vertices per detector
/// Throws IoError when the directory cannot be created or written.
void emit_report(const RunResults& results, const std::filesystem::path& dir,
                 const std::string& timestamp);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

}  // namespace edet::exp
