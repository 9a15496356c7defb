#pragma once

#include <vector>

#include "smallmass/dynamics.hpp"

namespace smallmass {

/// Specialized integration kernels for models with extra structure.
enum class SpecialKind { Scalar, ConstGamma, FluctDiss };

enum class FastPath { Auto, Off, Scalar, ConstGamma };

struct HierarchyOptions {
    PositionScheme scheme = PositionScheme::EulerMaruyama;
    FastPath fast_path = FastPath::Auto;
    double guard = kDefaultGuard;
    Vec z0;  // empty means zero (u0 = 0 satisfies the initial-condition bound)
};

/// One (mass, level) simulation: the output trajectory carries the
/// accumulated remainder path R (identically zero at level 1) and the fast
/// process z used to drive it.
struct HierarchyRun {
    double mass = 0.0;
    int level = 0;
    Trajectory traj;
    double max_z_norm = 0.0;
    bool sentinel = false;  // explosion guard tripped somewhere in the pipeline
};

/// Frozen-coefficient exponential step of the fast process
///   dz = -(1/m) tg(t, y) z dt + (1/sqrt m) F(t, y) dt + (1/sqrt m) sigma(t, y) dW
/// with coefficients at the left endpoint of the driving trajectory.
/// Throws FastProcessDivergence if the update is non-finite.
Vec step_z(const Model& model, double m, const Vec& z, const Vec& y_t, double t,
           const double* dW, double dt);

/// One increment of the remainder semimartingale for a driving step
/// (y_t, z_t) -> (y_next, z_next). Coefficients are evaluated at the left
/// endpoint except for the two total-differential terms, which are endpoint
/// differences of the bracketed quantities.
Vec remainder_increment(const Model& model, double m, double t, const Vec& y_t,
                        const Vec& y_next, const Vec& z_t, const Vec& z_next,
                        const double* dW, double dt);

/// Level `level` of the approximation hierarchy on the supplied grid.
/// Level 1 is the homogenized trajectory (with a zero remainder path); level
/// l > 1 integrates the homogenized drift/diffusion plus sqrt(m) dR, with R
/// driven by the level l-1 trajectory and its fast process on the same grid
/// and the same increments. Lower levels are computed recursively.
HierarchyRun run_level(const Model& model, double m, int level,
                       const WienerGrid& path, const Vec& q0,
                       const HierarchyOptions& opts = {});

/// Same, but with the driving level-(l-1) trajectory supplied by the caller.
HierarchyRun run_level_from(const Model& model, double m, int level,
                            const WienerGrid& path, const Vec& q0,
                            const Trajectory& driving,
                            const HierarchyOptions& opts = {});

/// All levels 1..max_level sharing one driving pipeline.
std::vector<HierarchyRun> run_hierarchy(const Model& model, double m, int max_level,
                                        const WienerGrid& path, const Vec& q0,
                                        const HierarchyOptions& opts = {});

/// Specialized fast paths: `Scalar` uses the scalar contraction tensor,
/// `ConstGamma` the endpoint-difference remainder of a state-independent
/// drag, `FluctDiss` the temperature-weighted divergence drift. Throws
/// WrongSpecializationError when the model lacks the required structure.
HierarchyRun run_level_special(SpecialKind kind, const Model& model, double m,
                               int level, const WienerGrid& path, const Vec& q0,
                               const HierarchyOptions& opts = {});

}  // namespace smallmass
