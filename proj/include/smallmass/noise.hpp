#pragma once

#include <cstdint>
#include <vector>

#include "smallmass/errors.hpp"

namespace smallmass {

/// Counter-based generation of one standard normal draw, keyed by
/// (seed, path_id, step, component). Stateless: the same key always yields
/// the same value, independent of call order or thread schedule.
double keyed_normal(std::uint64_t seed, std::uint64_t path_id,
                    std::uint64_t step, std::uint32_t component);

/// Brownian increments on a uniform grid. Increment (i, rho) is
/// sqrt(dt) * keyed_normal(seed, path_id, i, rho), so a grid regenerates
/// bit-identically from its key. Coarsening block-sums increments, which
/// preserves the partial-sum path at all shared grid points exactly.
class WienerGrid {
  public:
    WienerGrid(std::uint64_t seed, std::uint64_t path_id, std::int64_t steps,
               int k, double dt);

    double dt() const { return dt_; }
    std::int64_t steps() const { return steps_; }
    int noise_dim() const { return k_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t path_id() const { return path_id_; }

    /// Increment of component rho over [i*dt, (i+1)*dt).
    double increment(std::int64_t i, int rho) const {
        return data_[static_cast<std::size_t>(i) * k_ + rho];
    }
    const double* increment_row(std::int64_t i) const {
        return data_.data() + static_cast<std::size_t>(i) * k_;
    }

    /// Endpoint W(T) per component (sum of increments).
    std::vector<double> endpoint() const;

    /// Grid with step dt*factor whose increments are block sums of this
    /// grid's. factor must divide steps.
    WienerGrid coarsen(std::int64_t factor) const;

  private:
    WienerGrid() = default;

    std::uint64_t seed_ = 0;
    std::uint64_t path_id_ = 0;
    std::int64_t steps_ = 0;
    int k_ = 0;
    double dt_ = 0.0;
    std::vector<double> data_;  // steps x k, row-major
};

/// Convenience wrapper matching the grid constructor.
WienerGrid generate_path(std::uint64_t seed, std::uint64_t path_id,
                         std::int64_t steps, int k, double dt);

}  // namespace smallmass
