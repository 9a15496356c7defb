#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "smallmass/harness.hpp"
#include "smallmass/noise.hpp"

using namespace smallmass;

namespace {

Trajectory flat_trajectory(double dt, std::int64_t steps, std::vector<double> values) {
    Trajectory t;
    t.init(dt, steps, 1);
    t.q = std::move(values);
    return t;
}

StudyConfig tiny_study(int levels = 2) {
    StudyConfig c;
    c.model = make_model("ou-const");
    c.T = 0.5;
    c.hbar = 0.02;
    c.m0 = 0.125;
    c.mass_count = 3;
    c.levels = levels;
    c.paths = 24;
    c.seed = 77;
    c.control = ControlMode::Off;
    return c;
}

}  // namespace

TEST_CASE("strong_error: trivial cases") {
    std::vector<Trajectory> ref, same, shifted;
    for (int p = 0; p < 4; ++p) {
        std::vector<double> v{0.0, 0.1 * p, 0.3, -0.2};
        ref.push_back(flat_trajectory(0.1, 3, v));
        same.push_back(flat_trajectory(0.1, 3, v));
        for (auto& x : v) x += 0.25;
        shifted.push_back(flat_trajectory(0.1, 3, v));
    }
    ErrorEstimate zero = strong_error(ref, same, 2.0);
    CHECK(zero.err_supE == 0.0);
    CHECK(zero.err_Esup == 0.0);

    ErrorEstimate c = strong_error(ref, shifted, 2.0);
    CHECK(c.err_supE == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(c.err_Esup == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(c.stderr_supE == doctest::Approx(0.0).epsilon(1e-12));
    // constant offsets are norm-independent
    ErrorEstimate c4 = strong_error(ref, shifted, 4.0);
    CHECK(c4.err_supE == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("strong_error: Gaussian single-time oracle") {
    const double s = 0.7;
    const int paths = 4000;
    std::vector<Trajectory> ref, approx;
    for (int p = 0; p < paths; ++p) {
        ref.push_back(flat_trajectory(1.0, 1, {0.0, 0.0}));
        approx.push_back(flat_trajectory(1.0, 1, {0.0, s * keyed_normal(5, p, 0, 0)}));
    }
    ErrorEstimate e = strong_error(ref, approx, 2.0);
    CHECK(std::abs(e.err_supE - s) < 3.0 * e.stderr_supE);
    CHECK(e.err_supE == e.err_Esup);  // single nonzero time
}

TEST_CASE("strong_error: sentinel paths are excluded and counted") {
    std::vector<Trajectory> ref, approx;
    for (int p = 0; p < 3; ++p) {
        ref.push_back(flat_trajectory(0.1, 1, {0.0, 0.0}));
        approx.push_back(flat_trajectory(0.1, 1, {0.0, 1.0}));
    }
    approx[1].exploded = true;
    ErrorEstimate e = strong_error(ref, approx, 2.0);
    CHECK(e.sentinels == 1);
    CHECK(e.used_paths == 2);
    CHECK(e.err_supE == doctest::Approx(1.0));

    approx[1].dt = 0.2;
    CHECK_THROWS_AS(strong_error(ref, approx, 2.0), GridMismatchError);
}

TEST_CASE("fit_slope: exact power law") {
    std::vector<double> m{0.5, 0.25, 0.125, 0.0625};
    std::vector<double> err;
    for (double x : m) err.push_back(2.0 * std::sqrt(x));
    SlopeFit fit = fit_slope(m, err);
    CHECK(fit.slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-10));
    CHECK(fit.ci95 == doctest::Approx(0.0).epsilon(1e-8));

    CHECK_THROWS_AS(fit_slope({0.5, 0.25}, {1.0, 0.5}), InsufficientDataError);
    // nonpositive errors are dropped with a count
    SlopeFit partial = fit_slope({0.5, 0.25, 0.125, 0.0625}, {1.0, 0.5, 0.25, 0.0});
    CHECK(partial.points_used == 3);
    CHECK(partial.points_dropped == 1);
}

TEST_CASE("fit_slope: confidence interval covers a noisy unit slope") {
    std::vector<double> masses{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
    int covered = 0;
    const int resamples = 1000;
    for (int r = 0; r < resamples; ++r) {
        std::vector<double> err;
        for (std::size_t i = 0; i < masses.size(); ++i)
            err.push_back(masses[i] *
                          std::exp(0.05 * keyed_normal(606, r, i, 0)));
        SlopeFit fit = fit_slope(masses, err);
        if (std::abs(fit.slope - 1.0) <= fit.ci95) ++covered;
    }
    // nominal 95% coverage; the seeded draw sits near it
    CHECK(covered >= 930);
}

TEST_CASE("convergence_study: smoke, norm ordering, monotone levels") {
    ConvergenceReport rep = convergence_study(tiny_study());
    REQUIRE(rep.levels.size() == 2);
    REQUIRE(rep.levels[0].points.size() == 3);
    CHECK(rep.sentinel_paths == 0);
    CHECK_FALSE(rep.unreliable);
    for (const auto& level : rep.levels)
        for (const auto& pt : level.points) {
            CHECK(pt.err.err_supE > 0.0);
            CHECK(pt.err.err_supE <= pt.err.err_Esup + 1e-15);
        }
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(rep.levels[1].points[j].err.err_supE <
              rep.levels[0].points[j].err.err_supE);
    // momentum curve decreases with mass
    CHECK(rep.momentum_sup.front() > rep.momentum_sup.back());
    REQUIRE(rep.levels[0].slope_supE.has_value());
    CHECK(rep.levels[0].slope_supE->points_used == 3);
}

TEST_CASE("convergence_study: byte-stable across thread counts") {
    StudyConfig c = tiny_study();
    c.threads = 1;
    ConvergenceReport a = convergence_study(c);
    c.threads = 2;
    ConvergenceReport b = convergence_study(c);
    REQUIRE(a.levels.size() == b.levels.size());
    for (std::size_t l = 0; l < a.levels.size(); ++l)
        for (std::size_t j = 0; j < a.levels[l].points.size(); ++j) {
            CHECK(a.levels[l].points[j].err.err_supE ==
                  b.levels[l].points[j].err.err_supE);
            CHECK(a.levels[l].points[j].err.err_Esup ==
                  b.levels[l].points[j].err.err_Esup);
            CHECK(a.levels[l].points[j].err.stderr_supE ==
                  b.levels[l].points[j].err.stderr_supE);
        }
    for (std::size_t j = 0; j < a.momentum_sup.size(); ++j)
        CHECK(a.momentum_sup[j] == b.momentum_sup[j]);
}

TEST_CASE("convergence_study: single mass reports errors but no slope") {
    StudyConfig c = tiny_study();
    c.mass_count = 1;
    c.paths = 8;
    ConvergenceReport rep = convergence_study(c);
    CHECK(rep.levels[0].points.size() == 1);
    CHECK(rep.levels[0].points[0].err.err_supE > 0.0);
    CHECK_FALSE(rep.levels[0].slope_supE.has_value());
}

TEST_CASE("convergence_study: deterministic sigma-free limit hits the control flag") {
    // With sigma = 0 the hierarchy error keeps shrinking by a factor of m per
    // level until the scheme floor takes over; the Euler reference at a
    // coarse hbar puts that floor at level 3, and the dt-halving control
    // must mark those masses as floor-limited.
    StudyConfig c = tiny_study(3);
    c.model = make_model("ou-const", {{"sigma", 0.0}});
    c.paths = 2;
    c.q0 = 2.0;
    c.hbar = 0.05;
    c.ref_scheme = UnderdampedScheme::EulerMaruyama;
    c.control = ControlMode::Full;
    ConvergenceReport rep = convergence_study(c);
    for (const auto& pt : rep.levels[0].points) {
        REQUIRE(pt.control_shift_supE.has_value());
        CHECK_FALSE(pt.floor_limited);  // genuine O(m) gap, not the floor
    }
    for (const auto& pt : rep.levels[2].points) CHECK(pt.floor_limited);
}

TEST_CASE("convergence_study matches strong_error on a materialized ensemble") {
    StudyConfig c = tiny_study();
    c.mass_count = 1;
    c.paths = 16;
    c.control = ControlMode::Off;
    ConvergenceReport rep = convergence_study(c);

    const std::int64_t steps = std::llround(c.T / (c.hbar * c.m0));
    std::vector<Trajectory> ref, l1, l2;
    HierarchyOptions opts;
    for (std::int64_t p = 0; p < c.paths; ++p) {
        WienerGrid grid(c.seed, p, steps, 1, c.T / static_cast<double>(steps));
        Vec q0 = Vec::Zero(1), u0 = Vec::Zero(1);
        ref.push_back(simulate_underdamped(*c.model, c.m0, grid, q0, u0));
        auto runs = run_hierarchy(*c.model, c.m0, 2, grid, q0, opts);
        l1.push_back(std::move(runs[0].traj));
        l2.push_back(std::move(runs[1].traj));
    }
    ErrorEstimate e1 = strong_error(ref, l1, 2.0);
    ErrorEstimate e2 = strong_error(ref, l2, 2.0);
    CHECK(rep.levels[0].points[0].err.err_supE == doctest::Approx(e1.err_supE).epsilon(1e-12));
    CHECK(rep.levels[1].points[0].err.err_supE == doctest::Approx(e2.err_supE).epsilon(1e-12));
    CHECK(rep.levels[0].points[0].err.err_Esup == doctest::Approx(e1.err_Esup).epsilon(1e-12));
}

TEST_CASE("prob study: delta -> infinity empties the table") {
    StudyConfig c;
    c.model = make_model("double-well");
    c.T = 0.5;
    c.hbar = 0.02;
    c.m0 = 0.125;
    c.mass_count = 2;
    c.levels = 2;
    c.paths = 12;
    c.seed = 3;
    c.control = ControlMode::Off;
    c.cutoff_r = 10.0;
    c.delta = 1e12;
    c.eps = 0.1;
    ProbReport rep = prob_convergence_study(c);
    for (const auto& pt : rep.points) CHECK(pt.fraction == 0.0);
    CHECK(rep.nonincreasing_ok);
    CHECK_FALSE(rep.cutoff_dominated);
}

TEST_CASE("prob study: eps = level/2 degrades to the raw sup error") {
    StudyConfig c;
    c.model = make_model("double-well");
    c.T = 0.5;
    c.hbar = 0.01;
    c.m0 = 0.125;
    c.mass_count = 4;
    c.levels = 2;
    c.paths = 100;
    c.seed = 9;
    c.control = ControlMode::Off;
    c.cutoff_r = 10.0;
    c.eps = 1.0;     // level/2: the m-power cancels, statistic = sup ||dq||
    c.delta = 0.05;  // between the raw errors at the first and last mass
    ProbReport rep = prob_convergence_study(c);
    CHECK(rep.points.front().fraction > 0.0);
    CHECK(rep.points.back().fraction <= 0.02);
    CHECK(rep.points.back().fraction < rep.points.front().fraction);
    CHECK(rep.nonincreasing_ok);
}

TEST_CASE("prob study: tiny cutoff radius is flagged as cutoff-dominated") {
    StudyConfig c;
    c.model = make_model("double-well");
    c.T = 0.5;
    c.hbar = 0.02;
    c.m0 = 0.125;
    c.mass_count = 1;
    c.levels = 2;
    c.paths = 12;
    c.seed = 3;
    c.control = ControlMode::Off;
    c.cutoff_r = 0.05;  // far below typical excursions
    c.delta = 1.0;
    c.eps = 0.1;
    ProbReport rep = prob_convergence_study(c);
    CHECK(rep.cutoff_dominated);
}
