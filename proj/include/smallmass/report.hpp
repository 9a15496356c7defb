#pragma once

#include <string>

#include "smallmass/config.hpp"
#include "smallmass/validate.hpp"

namespace smallmass {

/// Comment-style configuration echo placed at the top of CSV outputs.
std::string config_echo_comment(const RunConfig& config);

/// errors.csv: one row per (level, mass), columns
/// level,m,err_supE,stderr_supE,err_Esup,stderr_Esup,sentinels.
std::string errors_csv(const RunConfig& config, const ConvergenceReport& report);

/// report.json: {config, per_level:[{level, slope_supE, ci95_supE, ...,
/// points:[...]}], momentum, ...}. Deterministic bytes for a fixed seed.
std::string report_json(const RunConfig& config, const ConvergenceReport& report);

/// Human-readable study summary, derived from report.json content only, so
/// re-reading the file reproduces the printed text exactly.
std::string summary_from_report_json(const std::string& json_text);

/// exceedance.csv + JSON twin for the convergence-in-probability study.
std::string exceedance_csv(const RunConfig& config, const ProbReport& report);
std::string exceedance_json(const RunConfig& config, const ProbReport& report);

/// validation.json for the validate subcommand.
std::string validation_json(const RunConfig& config, const ValidationReport& report);

/// Per-trajectory CSV (reference + levels side by side).
std::string trajectory_csv(const RunConfig& config, const Trajectory& reference,
                           const std::vector<Trajectory>& levels);

/// Self-contained plot script over errors.csv (static text).
std::string plot_script();

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace smallmass
