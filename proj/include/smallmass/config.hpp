#pragma once

#include <map>
#include <string>

#include "smallmass/harness.hpp"

namespace smallmass {

/// Flat key = value configuration with [section] headers; section names
/// prefix the keys ("[sim]\nT = 1" defines "sim.T"). '#' starts a comment.
struct RunConfig {
    std::map<std::string, std::string> values;
    std::string source;  // file name, for diagnostics

    bool has(const std::string& key) const { return values.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;

    /// Model parameters: every numeric key under model.params.*
    std::map<std::string, double> model_params() const;
};

RunConfig parse_config_text(const std::string& text, const std::string& source);
RunConfig parse_config_file(const std::string& path);

/// Apply a --override key=value argument.
void apply_override(RunConfig& config, const std::string& assignment);

/// Build the model named by the configuration.
ModelPtr model_from_config(const RunConfig& config);

/// Translate the configuration into a study plan. `threads` comes from the
/// command line, not the file, so reports stay byte-identical across runs
/// with different worker counts.
StudyConfig study_from_config(const RunConfig& config, int threads);

}  // namespace smallmass
