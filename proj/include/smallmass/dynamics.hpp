#pragma once

#include "smallmass/model.hpp"
#include "smallmass/noise.hpp"
#include "smallmass/trajectory.hpp"

namespace smallmass {

enum class UnderdampedScheme { Exponential, EulerMaruyama };
enum class PositionScheme { EulerMaruyama, Milstein };

/// Default radius of the explosion guard; crossing it marks the trajectory
/// rather than aborting the run.
inline constexpr double kDefaultGuard = 1e6;

struct PhaseState {
    double t = 0.0;
    Vec q;  // position
    Vec u;  // kinematic momentum u = m v
};

/// One step of the underdamped system. The exponential scheme freezes the
/// coefficients at the left endpoint and integrates the linear momentum
/// equation exactly, with a midpoint treatment of the noise convolution;
/// for constant coefficients it reproduces the stationary momentum
/// statistics up to the midpoint approximation.
PhaseState step_underdamped(const Model& model, double m, const PhaseState& s,
                            const double* dW, double dt,
                            UnderdampedScheme scheme = UnderdampedScheme::Exponential);

/// Underdamped reference trajectory on the supplied grid (dt = hbar * m by
/// the stiffness policy; the caller builds the grid accordingly). Records the
/// momentum path. Exceeding `guard` marks the trajectory as exploded.
Trajectory simulate_underdamped(const Model& model, double m, const WienerGrid& path,
                                const Vec& q0, const Vec& u0,
                                UnderdampedScheme scheme = UnderdampedScheme::Exponential,
                                double guard = kDefaultGuard,
                                bool allow_fast_path = true);

/// First-order (homogenized) trajectory: Euler-Maruyama by default, Milstein
/// as an n == 1 option, drift assembled from the total force and the
/// noise-induced drift. `fluct_diss_drift` computes the drift correction via
/// the temperature-weighted divergence shortcut instead of the general
/// contraction (requires the fluctuation-dissipation structure).
Trajectory simulate_homogenized(const Model& model, const WienerGrid& path,
                                const Vec& q0,
                                PositionScheme scheme = PositionScheme::EulerMaruyama,
                                double guard = kDefaultGuard,
                                bool allow_fast_path = true,
                                bool fluct_diss_drift = false);

/// Largest violation of the exponential decay bound by the products of the
/// frozen-coefficient step propagators along a simulated path: returns
/// max over prefixes [0, t] and over single steps of
/// ||Prod E|| - exp(-lambda (t-s)/m). Non-positive values mean the bound holds.
double propagator_decay_excess(const Model& model, double m, const Trajectory& ref);

}  // namespace smallmass
