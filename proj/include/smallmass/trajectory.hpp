#pragma once

#include <cstdint>
#include <vector>

#include "smallmass/linalg.hpp"

namespace smallmass {

/// Positions (and optional auxiliary processes) on a uniform time grid.
/// Row i is the state at t = i*dt; arrays have steps+1 rows.
struct Trajectory {
    double dt = 0.0;
    std::int64_t steps = 0;
    int n = 0;

    std::vector<double> q;  // (steps+1) x n
    std::vector<double> u;  // kinematic momentum, empty unless recorded
    std::vector<double> z;  // rescaled momentum, empty unless recorded
    std::vector<double> R;  // accumulated remainder path, empty unless recorded

    bool exploded = false;
    std::int64_t first_bad_step = -1;

    void init(double dt_, std::int64_t steps_, int n_, bool with_u = false,
              bool with_z = false, bool with_R = false) {
        dt = dt_;
        steps = steps_;
        n = n_;
        q.assign(static_cast<std::size_t>(steps + 1) * n, 0.0);
        if (with_u) u.assign(q.size(), 0.0);
        if (with_z) z.assign(q.size(), 0.0);
        if (with_R) R.assign(q.size(), 0.0);
        exploded = false;
        first_bad_step = -1;
    }

    double* row(std::vector<double>& a, std::int64_t i) {
        return a.data() + static_cast<std::size_t>(i) * n;
    }
    const double* row(const std::vector<double>& a, std::int64_t i) const {
        return a.data() + static_cast<std::size_t>(i) * n;
    }

    Eigen::Map<const Vec> q_at(std::int64_t i) const {
        return Eigen::Map<const Vec>(row(q, i), n);
    }
    Eigen::Map<const Vec> u_at(std::int64_t i) const {
        return Eigen::Map<const Vec>(row(u, i), n);
    }
    Eigen::Map<const Vec> R_at(std::int64_t i) const {
        return Eigen::Map<const Vec>(row(R, i), n);
    }
    double time_at(std::int64_t i) const { return static_cast<double>(i) * dt; }
};

}  // namespace smallmass
