#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "smallmass/hierarchy.hpp"

namespace smallmass {

/// Strong-error estimate between two coupled trajectory ensembles, in both
/// norms: err_supE = max over grid times of (mean over paths ||dq||^p)^{1/p},
/// err_Esup = (mean over paths of max over times ||dq||^p)^{1/p}.
struct ErrorEstimate {
    double err_supE = 0.0;
    double err_Esup = 0.0;
    double stderr_supE = 0.0;
    double stderr_Esup = 0.0;
    std::int64_t argmax_time_index = 0;
    std::int64_t sentinels = 0;  // flagged paths excluded from the statistics
    std::int64_t used_paths = 0;
};

ErrorEstimate strong_error(const std::vector<Trajectory>& reference,
                           const std::vector<Trajectory>& approx, double p);

/// Ordinary least squares of log(err) against log(m).
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double ci95 = 0.0;  // half-width from residual variance (t quantile)
    int points_used = 0;
    int points_dropped = 0;  // nonpositive error values
};

/// Throws InsufficientDataError when fewer than 3 usable points remain.
SlopeFit fit_slope(const std::vector<double>& masses,
                   const std::vector<double>& errors);

enum class ControlMode { Off, MinMass, Full };

/// A coupled mass-sweep experiment: common Brownian paths across the
/// geometric mass family (nested grids, dt = hbar * m), reference
/// underdamped trajectories against hierarchy levels 1..levels.
struct StudyConfig {
    ModelPtr model;
    double T = 1.0;
    double hbar = 0.01;
    double m0 = 0.125;       // largest mass
    int mass_count = 6;
    int mass_ratio = 2;      // family m0 * ratio^-j; nested grids need 2
    int levels = 2;
    UnderdampedScheme ref_scheme = UnderdampedScheme::Exponential;
    PositionScheme level_scheme = PositionScheme::EulerMaruyama;
    FastPath fast_path = FastPath::Auto;
    double q0 = 0.0;         // broadcast to all components
    double z0 = 0.0;         // rescaled momentum start; u0 = sqrt(m) z0
    std::int64_t paths = 100;
    std::uint64_t seed = 1;
    double p = 2.0;
    double guard = kDefaultGuard;
    ControlMode control = ControlMode::MinMass;
    int threads = 0;  // 0 = hardware concurrency

    // prob_convergence_study extras
    double cutoff_r = 0.0;  // 0 = no cutoff
    double delta = 1.0;
    double eps = 0.1;
};

struct LevelPoint {
    double m = 0.0;
    ErrorEstimate err;
    // Relative shift of err_supE under the dt-halving control, when run.
    std::optional<double> control_shift_supE;
    std::optional<double> control_shift_Esup;
    bool floor_limited = false;
};

struct LevelReport {
    int level = 0;
    std::vector<LevelPoint> points;  // one per mass, largest first
    std::optional<SlopeFit> slope_supE;
    std::optional<SlopeFit> slope_Esup;
};

struct ConvergenceReport {
    std::vector<double> masses;
    std::vector<LevelReport> levels;
    std::vector<double> momentum_sup;  // sup_t E[||u||^2]^{1/2} per mass
    std::optional<SlopeFit> momentum_slope;
    std::int64_t total_paths = 0;
    std::int64_t sentinel_paths = 0;
    bool unreliable = false;  // sentinel fraction above 1%

    // echo of the configuration that produced the report
    double T = 0.0, hbar = 0.0, p = 0.0;
    std::uint64_t seed = 0;
    std::int64_t obs_points = 0;  // observation-grid resolution for sup-of-mean
};

ConvergenceReport convergence_study(const StudyConfig& config);

/// Exceedance table for the convergence-in-probability experiment on a
/// cutoff model: per mass, the fraction of coupled paths with
/// sup_t ||q_ref - q_level|| / m^{level/2 - eps} > delta.
struct ProbPoint {
    double m = 0.0;
    double fraction = 0.0;
    double ci_low = 0.0, ci_high = 0.0;  // Wilson 95%
    std::int64_t exceed = 0;
    std::int64_t used_paths = 0;
    double max_excursion = 0.0;  // largest sup ||q_ref|| among used paths
};

struct ProbReport {
    std::vector<ProbPoint> points;
    int level = 0;
    double delta = 0.0, eps = 0.0, r = 0.0;
    std::int64_t sentinel_paths = 0;
    bool cutoff_dominated = false;  // some path left the cutoff-identity region
    bool nonincreasing_ok = true;   // table non-increasing up to CI width
    std::uint64_t seed = 0;
};

ProbReport prob_convergence_study(const StudyConfig& config);

}  // namespace smallmass
