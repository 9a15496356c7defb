#include "smallmass/noise.hpp"

#include <cmath>

namespace smallmass {

namespace {

// Philox4x32-10 (Salmon et al.): four 32-bit counter words, two key words.
struct Philox4x32 {
    std::uint32_t c[4];
    std::uint32_t k[2];

    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                        std::uint32_t& lo) {
        std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void round() {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(M0, c[0], hi0, lo0);
        mulhilo(M1, c[2], hi1, lo1);
        std::uint32_t n0 = hi1 ^ c[1] ^ k[0];
        std::uint32_t n1 = lo1;
        std::uint32_t n2 = hi0 ^ c[3] ^ k[1];
        std::uint32_t n3 = lo0;
        c[0] = n0;
        c[1] = n1;
        c[2] = n2;
        c[3] = n3;
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
    }

    void run10() {
        for (int r = 0; r < 10; ++r) round();
    }
};

inline double u64_to_open_unit(std::uint64_t x) {
    // (0,1): 53-bit mantissa plus half-ulp offset keeps log() finite.
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double keyed_normal(std::uint64_t seed, std::uint64_t path_id,
                    std::uint64_t step, std::uint32_t component) {
    // One Philox block per draw: counter = (draw index, path), key = seed.
    std::uint64_t idx = step * 0x10000ull + component;  // component < 2^16
    Philox4x32 g;
    g.c[0] = static_cast<std::uint32_t>(idx);
    g.c[1] = static_cast<std::uint32_t>(idx >> 32);
    g.c[2] = static_cast<std::uint32_t>(path_id);
    g.c[3] = static_cast<std::uint32_t>(path_id >> 32);
    g.k[0] = static_cast<std::uint32_t>(seed);
    g.k[1] = static_cast<std::uint32_t>(seed >> 32);
    g.run10();

    std::uint64_t a = (static_cast<std::uint64_t>(g.c[0]) << 32) | g.c[1];
    std::uint64_t b = (static_cast<std::uint64_t>(g.c[2]) << 32) | g.c[3];
    double u1 = u64_to_open_unit(a);
    double u2 = u64_to_open_unit(b);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

WienerGrid::WienerGrid(std::uint64_t seed, std::uint64_t path_id,
                       std::int64_t steps, int k, double dt)
    : seed_(seed), path_id_(path_id), steps_(steps), k_(k), dt_(dt) {
    if (steps < 0 || k <= 0 || !(dt > 0.0))
        throw Error("WienerGrid: bad steps, k, or dt");
    if (k >= 0x10000) throw Error("WienerGrid: noise dimension too large");
    if (static_cast<double>(steps) * k >= 0x1p40)
        throw Error("WienerGrid: steps*k exceeds 2^40");
    data_.resize(static_cast<std::size_t>(steps) * k);
    const double scale = std::sqrt(dt);
    std::size_t at = 0;
    for (std::int64_t i = 0; i < steps; ++i)
        for (int rho = 0; rho < k; ++rho, ++at)
            data_[at] = scale * keyed_normal(seed, path_id,
                                             static_cast<std::uint64_t>(i),
                                             static_cast<std::uint32_t>(rho));
}

std::vector<double> WienerGrid::endpoint() const {
    if (steps_ == 0) return std::vector<double>(k_, 0.0);
    WienerGrid total = coarsen(steps_);
    return std::vector<double>(total.data_.begin(), total.data_.end());
}

WienerGrid WienerGrid::coarsen(std::int64_t factor) const {
    if (factor <= 0 || steps_ % factor != 0 || (steps_ == 0 && factor != 1))
        throw GridMismatchError("coarsen: factor must divide steps");
    if (factor == 1) return *this;
    WienerGrid out;
    out.seed_ = seed_;
    out.path_id_ = path_id_;
    out.k_ = k_;
    out.data_ = data_;
    std::int64_t steps = steps_;
    // Canonical reduction order: pairwise halving while the factor is even,
    // so dyadic coarsenings compose bit-exactly (coarsen(coarsen(p,2),2) ==
    // coarsen(p,4)), then one grouped pass for any odd remainder.
    while (factor % 2 == 0) {
        steps /= 2;
        for (std::int64_t i = 0; i < steps; ++i) {
            std::size_t a = static_cast<std::size_t>(2 * i) * k_;
            std::size_t d = static_cast<std::size_t>(i) * k_;
            for (int rho = 0; rho < k_; ++rho)
                out.data_[d + rho] = out.data_[a + rho] + out.data_[a + k_ + rho];
        }
        factor /= 2;
    }
    if (factor > 1) {
        std::int64_t coarse = steps / factor;
        for (std::int64_t i = 0; i < coarse; ++i) {
            std::size_t d = static_cast<std::size_t>(i) * k_;
            std::size_t a = static_cast<std::size_t>(i * factor) * k_;
            for (int rho = 0; rho < k_; ++rho) {
                double s = out.data_[a + rho];
                for (std::int64_t j = 1; j < factor; ++j)
                    s += out.data_[a + static_cast<std::size_t>(j) * k_ + rho];
                out.data_[d + rho] = s;
            }
        }
        steps = coarse;
    }
    out.steps_ = steps;
    out.dt_ = dt_ * (static_cast<double>(steps_) / static_cast<double>(steps));
    out.data_.resize(static_cast<std::size_t>(steps) * k_);
    return out;
}

WienerGrid generate_path(std::uint64_t seed, std::uint64_t path_id,
                         std::int64_t steps, int k, double dt) {
    return WienerGrid(seed, path_id, steps, k, dt);
}

}  // namespace smallmass
