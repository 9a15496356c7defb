#pragma once

#include <string>
#include <utility>
#include <vector>

#include "smallmass/model.hpp"

namespace smallmass {

struct CheckResult {
    std::string name;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    std::string provenance;  // "analytic" | "finite-difference" | "exact"
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    std::vector<std::pair<std::string, double>> bounds;  // field -> max norm over probes
    int probes = 0;
    bool all_pass = true;
};

/// Probe-based checks of a model's coefficient fields: drag symmetry and
/// spectral floor, inverse consistency, gradient-vs-potential agreement, and
/// one-level finite-difference verification of every derivative supplier
/// marked analytic. Failures are reported, never thrown.
ValidationReport validate_model(const Model& model,
                                const std::vector<std::pair<double, Vec>>& probes);

/// Deterministic probe cloud: `count` points with coordinates in
/// [-radius, radius] and times in [0, t_max], keyed by `seed`.
std::vector<std::pair<double, Vec>> make_probes(const Model& model, int count,
                                                double radius, double t_max,
                                                std::uint64_t seed);

}  // namespace smallmass
