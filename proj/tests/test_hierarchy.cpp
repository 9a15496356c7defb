#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "smallmass/harness.hpp"
#include "smallmass/hierarchy.hpp"
#include "smallmass/validate.hpp"

using namespace smallmass;

namespace {

Vec vec1(double x) {
    Vec v(1);
    v(0) = x;
    return v;
}

// Constant non-diagonal drag with state-dependent force and diffusion; the
// contraction tensor vanishes identically, so the remainder reduces to the
// endpoint difference.
class ConstDragModel final : public Model {
  public:
    int dim() const override { return 2; }
    int noise_dim() const override { return 2; }
    double spectral_floor() const override { return 1.2; }
    ModelTraits traits() const override {
        ModelTraits t;
        t.gamma_state_independent = true;
        t.time_independent = true;
        return t;
    }
    DerivativeProvenance derivative_provenance() const override {
        DerivativeProvenance p;
        p.dgamma_dt = p.dgamma_dq = p.d2gamma_dqdq = p.d2gamma_dtdq = true;
        p.gradV = true;
        return p;
    }
    void gamma(double, const Vec&, Mat& out) const override {
        out.resize(2, 2);
        out << 2.0, 0.3, 0.3, 1.5;
    }
    void dgamma_dt(double, const Vec&, Mat& out) const override { out = Mat::Zero(2, 2); }
    void dgamma_dq(double, const Vec&, int, Mat& out) const override { out = Mat::Zero(2, 2); }
    void d2gamma_dqdq(double, const Vec&, int, int, Mat& out) const override {
        out = Mat::Zero(2, 2);
    }
    void d2gamma_dtdq(double, const Vec&, int, Mat& out) const override {
        out = Mat::Zero(2, 2);
    }
    double V(double, const Vec& q) const override { return 0.5 * q.squaredNorm(); }
    void gradV(double, const Vec& q, Vec& out) const override { out = q; }
    void F_ext(double, const Vec& q, Vec& out) const override {
        out.resize(2);
        out(0) = std::sin(q(1));
        out(1) = 0.2 * std::cos(q(0));
    }
    void sigma(double, const Vec& q, Mat& out) const override {
        out = Mat::Zero(2, 2);
        out(0, 0) = 1.0 + 0.3 * std::tanh(q(0));
        out(1, 1) = 0.8;
    }

  private:
};

Mat tilde_gamma_of(const Model& model, double t, const Vec& q) {
    return eval_tilde_gamma(model, t, q, 0).tg;
}

// State-dependent isotropic drag plus a uniform magnetic part: every
// remainder term is active (nonzero contraction tensor and its spatial
// derivative), and no fast path applies.
class CurvedMagneticModel final : public Model {
  public:
    int dim() const override { return 2; }
    int noise_dim() const override { return 2; }
    double spectral_floor() const override { return g0_ - g1_; }
    ModelTraits traits() const override {
        ModelTraits t;
        t.psi_zero = false;
        t.time_independent = true;
        return t;
    }
    DerivativeProvenance derivative_provenance() const override {
        DerivativeProvenance p;
        p.dgamma_dt = p.dgamma_dq = p.d2gamma_dqdq = p.d2gamma_dtdq = true;
        p.dpsi_dt = p.dpsi_dq = p.d2psi_dqdq = p.d3psi_dqdqdq = true;
        p.d2psi_dtdq = p.d3psi_dtdqdq = true;
        p.gradV = p.dsigma_dq = true;
        return p;
    }
    void gamma(double, const Vec& q, Mat& out) const override {
        out = (g0_ + g1_ * std::sin(q(0) + q(1))) * Mat::Identity(2, 2);
    }
    void dgamma_dt(double, const Vec&, Mat& out) const override { out = Mat::Zero(2, 2); }
    void dgamma_dq(double, const Vec& q, int, Mat& out) const override {
        out = g1_ * std::cos(q(0) + q(1)) * Mat::Identity(2, 2);
    }
    void d2gamma_dqdq(double, const Vec& q, int, int, Mat& out) const override {
        out = -g1_ * std::sin(q(0) + q(1)) * Mat::Identity(2, 2);
    }
    void d2gamma_dtdq(double, const Vec&, int, Mat& out) const override {
        out = Mat::Zero(2, 2);
    }
    void psi(double, const Vec& q, Vec& out) const override {
        out.resize(2);
        out(0) = -0.5 * B_ * q(1);
        out(1) = 0.5 * B_ * q(0);
    }
    void dpsi_dt(double, const Vec&, Vec& out) const override { out = Vec::Zero(2); }
    void dpsi_dq(double, const Vec&, int i, Vec& out) const override {
        out.resize(2);
        out(0) = i == 1 ? -0.5 * B_ : 0.0;
        out(1) = i == 0 ? 0.5 * B_ : 0.0;
    }
    void d2psi_dqdq(double, const Vec&, int, int, Vec& out) const override {
        out = Vec::Zero(2);
    }
    void d3psi_dqdqdq(double, const Vec&, int, int, int, Vec& out) const override {
        out = Vec::Zero(2);
    }
    void d2psi_dtdq(double, const Vec&, int, Vec& out) const override {
        out = Vec::Zero(2);
    }
    void d3psi_dtdqdq(double, const Vec&, int, int, Vec& out) const override {
        out = Vec::Zero(2);
    }
    double V(double, const Vec& q) const override { return 0.5 * q.squaredNorm(); }
    void gradV(double, const Vec& q, Vec& out) const override { out = q; }
    void sigma(double, const Vec&, Mat& out) const override { out = Mat::Identity(2, 2); }
    void dsigma_dq(double, const Vec&, int, Mat& out) const override {
        out = Mat::Zero(2, 2);
    }

  private:
    double g0_ = 2.0, g1_ = 0.6, B_ = 0.7;
};

}  // namespace

TEST_CASE("step_z: pure decay and deterministic fixed point") {
    ConstDragModel model;
    const double m = 0.04, dt = 0.01 * m;
    Vec y = Vec::Zero(2);
    Vec z(2);
    z << 0.7, -0.3;
    double dW0[2] = {0.0, 0.0};

    // sigma != 0 but dW = 0, F(0) = (0,0.2): subtract the force response to
    // isolate the decay
    Mat G = tilde_gamma_of(model, 0.0, y);
    Mat E = mat_exp(G, -dt / m);
    Vec F = total_force(model, 0.0, y);
    Vec expected = E * z + (Mat::Identity(2, 2) - E) * (std::sqrt(m) * (G.inverse() * F));
    Vec got = step_z(model, m, z, y, 0.0, dW0, dt);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-14);

    // fixed point z* = sqrt(m) tg^{-1} F
    Vec zstar = std::sqrt(m) * (G.inverse() * F);
    Vec iter = zstar;
    for (int k = 0; k < 100; ++k) iter = step_z(model, m, iter, y, 0.0, dW0, dt);
    CHECK((iter - zstar).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("z noise increment covariance equals J - E J E^T (quadrature)") {
    ConstDragModel model;
    const double m = 0.05, dt = 0.01 * m;
    Mat G = tilde_gamma_of(model, 0.0, Vec::Zero(2));
    Mat Sigma = noise_covariance(model, 0.0, Vec::Zero(2));
    Mat J = solve_lyapunov(G, Sigma);
    Mat E = mat_exp(G, -dt / m);
    Mat target = J - E * J * E.transpose();

    // Simpson quadrature of (1/m) int_0^dt e^{-G s/m} Sigma e^{-G^T s/m} ds
    const int steps = 2000;
    const double h = dt / steps;
    Mat Estep = mat_exp(G, -h / m);
    Mat P = Mat::Identity(2, 2);
    Mat acc = Sigma;
    for (int i = 1; i <= steps; ++i) {
        P = P * Estep;
        double w = (i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * (P * Sigma * P.transpose());
    }
    Mat quad = acc * (h / 3.0 / m);
    CHECK((quad - target).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("remainder increment: all-zero inputs") {
    ConstDragModel model;
    Vec y = Vec::Zero(2), z = Vec::Zero(2);
    double dW[2] = {0.3, -0.2};
    Vec dR = remainder_increment(model, 0.04, 0.0, y, y, z, z, dW, 4e-4);
    CHECK(dR.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("remainder increment: constant drag reduces to the endpoint difference") {
    ConstDragModel model;
    Mat G = tilde_gamma_of(model, 0.0, Vec::Zero(2));
    Mat Ginv = G.inverse();
    Vec y(2), yn(2), z(2), zn(2);
    y << 0.4, -0.2;
    yn << 0.45, -0.15;
    z << 0.8, 0.1;
    zn << 0.6, 0.2;
    double dW[2] = {0.05, -0.02};
    Vec dR = remainder_increment(model, 0.09, 0.0, y, yn, z, zn, dW, 9e-4);
    Vec expected = -(Ginv * (zn - z));
    CHECK((dR - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("remainder telescopes for constant time-independent drag") {
    ConstDragModel model;
    const double m = 0.05, dt = 5e-4;
    Mat G = tilde_gamma_of(model, 0.0, Vec::Zero(2));
    Mat Ginv = G.inverse();
    WienerGrid grid(17, 2, 400, 2, dt);
    Vec y = Vec::Zero(2), z = Vec::Zero(2);
    Vec sum = Vec::Zero(2);
    Vec z0 = z;
    for (std::int64_t i = 0; i < grid.steps(); ++i) {
        double t = static_cast<double>(i) * dt;
        Vec yn = y + 0.01 * Vec::Ones(2) * std::sin(0.1 * static_cast<double>(i));
        Vec zn = step_z(model, m, z, y, t, grid.increment_row(i), dt);
        sum += remainder_increment(model, m, t, y, yn, z, zn, grid.increment_row(i), dt);
        y = yn;
        z = zn;
    }
    Vec expected = -(Ginv * (z - z0));
    CHECK((sum - expected).cwiseAbs().maxCoeff() < 5e-12);
}

TEST_CASE("remainder increment: generic assembly equals the scalar simplified formula") {
    auto model = make_model("scalar-sin");
    const double m = 0.02, dt = 2e-4;
    auto Y_of = [&](double q) {
        double g = 2.0 + std::sin(q);
        return -std::cos(q) / (2.0 * g * g * g);
    };
    auto dY_of = [&](double q) {
        double g = 2.0 + std::sin(q), gp = std::cos(q), gpp = -std::sin(q);
        double g4 = g * g * g * g;
        return -0.5 * gpp / (g * g * g) + 1.5 * gp * gp / g4;
    };
    for (int trial = 0; trial < 10; ++trial) {
        double y = 0.3 * trial - 1.0, yn = y + 0.01;
        double z = 0.5 - 0.1 * trial, zn = z + 0.02;
        double dW = 0.003 * (trial - 4);
        Vec dR = remainder_increment(*model, m, 0.0, vec1(y), vec1(yn), vec1(z),
                                     vec1(zn), &dW, dt);
        double g = 2.0 + std::sin(y), gn = 2.0 + std::sin(yn);
        double F = -y, sig = std::sqrt(2.0);
        double expected = -(zn / gn - z / g) + 2.0 * Y_of(y) * z * F * dt +
                          z * z * z * dY_of(y) * dt + 2.0 * Y_of(y) * z * sig * dW -
                          std::sqrt(m) * (Y_of(yn) * zn * zn - Y_of(y) * z * z);
        CHECK(dR(0) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("stochastic convolution decomposition: discrete sides converge at first order") {
    const double gamma = 1.2, sigma = 0.8, m = 0.05, T = 1.0;
    auto supdiff = [&](const WienerGrid& g) {
        const std::int64_t N = g.steps();
        const double dt = g.dt();
        std::vector<double> W(N + 1, 0.0);
        for (std::int64_t i = 0; i < N; ++i) W[i + 1] = W[i] + g.increment(i, 0);
        double worst = 0.0;
        for (std::int64_t nidx = 1; nidx <= N; ++nidx) {
            double t = dt * static_cast<double>(nidx);
            double phi_t = std::exp(-gamma * t / m);
            double lhs = 0.0, direct = 0.0, corr = 0.0;
            for (std::int64_t s = 0; s < nidx; ++s) {
                double ts = dt * static_cast<double>(s);
                double inv_phi_s = std::exp(gamma * ts / m);
                lhs += inv_phi_s * sigma * g.increment(s, 0);
                direct += sigma * g.increment(s, 0);
                corr += inv_phi_s * gamma * (sigma * (W[nidx] - W[s])) * dt;
            }
            double left = phi_t * lhs;
            double right = phi_t * direct + (1.0 / m) * phi_t * corr;
            worst = std::max(worst, std::abs(left - right));
        }
        return worst;
    };
    double mean_ratio = 0.0;
    const int paths = 4;
    for (int p = 0; p < paths; ++p) {
        WienerGrid fine(501, p, 1024, 1, T / 1024.0);
        WienerGrid coarse = fine.coarsen(2);
        mean_ratio += supdiff(coarse) / supdiff(fine);
    }
    mean_ratio /= paths;
    CHECK(mean_ratio > 1.6);
    CHECK(mean_ratio < 2.4);
}

TEST_CASE("run_level: level 1 is bitwise the homogenized trajectory") {
    auto model = make_model("scalar-sin");
    WienerGrid grid(23, 5, 800, 1, 1.0 / 800.0 * 0.125 * 0.01 * 800);
    HierarchyOptions opts;
    HierarchyRun run = run_level(*model, 0.125, 1, grid, vec1(0.0), opts);
    Trajectory direct = simulate_homogenized(*model, grid, vec1(0.0), opts.scheme,
                                             opts.guard, true);
    REQUIRE(run.traj.q.size() == direct.q.size());
    for (std::size_t i = 0; i < direct.q.size(); ++i) CHECK(run.traj.q[i] == direct.q[i]);
    // identically-zero remainder path at level 1
    for (double r : run.traj.R) CHECK(r == 0.0);
}

TEST_CASE("run_level: no noise, no force, constant drag keeps the state put") {
    auto model = make_model("ou-const", {{"sigma", 0.0}, {"kappa", 0.0}});
    WienerGrid grid(29, 1, 512, 1, 1e-4);
    for (int level = 1; level <= 3; ++level) {
        HierarchyRun run = run_level(*model, 1.0 / 64.0, level, grid, vec1(1.5));
        for (std::int64_t i = 0; i <= grid.steps(); ++i) CHECK(run.traj.q[i] == 1.5);
    }
}

TEST_CASE("run_level: level 2 beats level 1 on coupled paths") {
    auto model = make_model("ou-const");
    const double m = 1.0 / 64.0, hbar = 0.01, T = 1.0;
    const std::int64_t steps = static_cast<std::int64_t>(std::llround(T / (hbar * m)));
    const int paths = 150;
    std::vector<Trajectory> ref, l1, l2;
    HierarchyOptions opts;
    for (int p = 0; p < paths; ++p) {
        WienerGrid grid(31337, p, steps, 1, T / static_cast<double>(steps));
        ref.push_back(simulate_underdamped(*model, m, grid, vec1(0.0), vec1(0.0)));
        auto runs = run_hierarchy(*model, m, 2, grid, vec1(0.0), opts);
        l1.push_back(std::move(runs[0].traj));
        l2.push_back(std::move(runs[1].traj));
    }
    ErrorEstimate e1 = strong_error(ref, l1, 2.0);
    ErrorEstimate e2 = strong_error(ref, l2, 2.0);
    CHECK(e2.err_supE < e1.err_supE);
    CHECK(e2.err_Esup < e1.err_Esup);
    CHECK(e1.err_supE <= e1.err_Esup);  // norm ordering
    CHECK(e2.err_supE <= e2.err_Esup);
}

TEST_CASE("generic tensor route: level 2 beats level 1 in 2d") {
    CurvedMagneticModel model;
    // analytic suppliers of the test model first
    auto probes = make_probes(model, 40, 2.5, 1.0, 61);
    ValidationReport vrep = validate_model(model, probes);
    for (const auto& c : vrep.checks) {
        INFO(c.name, " residual ", c.max_residual);
        CHECK(c.pass);
    }

    const double m = 1.0 / 32.0, T = 0.5, hbar = 0.01;
    const std::int64_t steps = std::llround(T / (hbar * m));
    const int paths = 24;
    std::vector<Trajectory> ref, l1, l2;
    HierarchyOptions opts;  // auto resolves to the generic kernel here
    for (int p = 0; p < paths; ++p) {
        WienerGrid grid(808, p, steps, 2, T / static_cast<double>(steps));
        ref.push_back(simulate_underdamped(model, m, grid, Vec::Zero(2), Vec::Zero(2)));
        auto runs = run_hierarchy(model, m, 2, grid, Vec::Zero(2), opts);
        l1.push_back(std::move(runs[0].traj));
        l2.push_back(std::move(runs[1].traj));
    }
    ErrorEstimate e1 = strong_error(ref, l1, 2.0);
    ErrorEstimate e2 = strong_error(ref, l2, 2.0);
    CHECK(e1.sentinels == 0);
    CHECK(e2.err_supE < 0.5 * e1.err_supE);
    CHECK(e2.err_Esup < e1.err_Esup);
}

TEST_CASE("fast z process equilibrates to the Lyapunov covariance") {
    auto model = make_model("ou-const");  // gamma = 1, sigma = 1 -> J = 1/2
    const double m = 0.02, hbar = 0.01;
    const std::int64_t steps = 200000;
    WienerGrid grid(911, 0, steps, 1, hbar * m);
    auto runs = run_hierarchy(*model, m, 2, grid, vec1(0.0));
    const Trajectory& t2 = runs[1].traj;
    REQUIRE_FALSE(t2.exploded);
    // sample every ~3 relaxation times after burn-in
    const std::int64_t spacing = 300, burn = steps / 10;
    double s = 0.0, s2 = 0.0;
    std::int64_t count = 0;
    for (std::int64_t i = burn; i <= steps; i += spacing) {
        s += t2.z[i];
        s2 += t2.z[i] * t2.z[i];
        ++count;
    }
    double var = s2 / count - (s / count) * (s / count);
    double tol = 3.0 * 0.5 * std::sqrt(2.0 / static_cast<double>(count));
    CHECK(std::abs(var - 0.5) < tol);
}

TEST_CASE("special kinds match the generic route") {
    HierarchyOptions generic_opts;
    generic_opts.fast_path = FastPath::Off;

    SUBCASE("scalar") {
        auto model = make_model("scalar-sin");
        const double m = 1.0 / 64.0;
        const std::int64_t steps = 3200;  // T = 0.5 at hbar = 0.01
        for (int p = 0; p < 5; ++p) {
            WienerGrid grid(41, p, steps, 1, 0.5 / static_cast<double>(steps));
            HierarchyRun gen = run_level(*model, m, 2, grid, vec1(0.0), generic_opts);
            HierarchyRun fast = run_level_special(SpecialKind::Scalar, *model, m, 2,
                                                  grid, vec1(0.0));
            double d = 0.0;
            for (std::int64_t i = 0; i <= steps; ++i)
                d = std::max(d, std::abs(gen.traj.q[i] - fast.traj.q[i]));
            CHECK(d <= 1e-9);
        }
    }
    SUBCASE("const gamma") {
        auto model = make_model("ou-const");
        const double m = 1.0 / 64.0;
        const std::int64_t steps = 3200;
        for (int p = 0; p < 5; ++p) {
            WienerGrid grid(43, p, steps, 1, 0.5 / static_cast<double>(steps));
            HierarchyRun gen = run_level(*model, m, 2, grid, vec1(0.2), generic_opts);
            HierarchyRun fast = run_level_special(SpecialKind::ConstGamma, *model, m, 2,
                                                  grid, vec1(0.2));
            double d = 0.0;
            for (std::int64_t i = 0; i <= steps; ++i)
                d = std::max(d, std::abs(gen.traj.q[i] - fast.traj.q[i]));
            CHECK(d <= 1e-9);
        }
    }
    SUBCASE("fluct-diss drift") {
        auto model = make_model("scalar-sin");
        const double m = 1.0 / 32.0;
        const std::int64_t steps = 1600;
        WienerGrid grid(47, 0, steps, 1, 0.5 / static_cast<double>(steps));
        HierarchyRun gen = run_level(*model, m, 2, grid, vec1(0.0), generic_opts);
        HierarchyRun fd = run_level_special(SpecialKind::FluctDiss, *model, m, 2, grid,
                                            vec1(0.0), generic_opts);
        double d = 0.0;
        for (std::int64_t i = 0; i <= steps; ++i)
            d = std::max(d, std::abs(gen.traj.q[i] - fd.traj.q[i]));
        CHECK(d <= 1e-9);
    }
}

TEST_CASE("const-gamma fast path: remainder path is the endpoint difference") {
    auto model = make_model("ou-const");
    const double m = 0.02;
    WienerGrid grid(53, 3, 2000, 1, 0.01 * m);
    HierarchyRun run = run_level_special(SpecialKind::ConstGamma, *model, m, 2, grid,
                                         vec1(0.0));
    for (std::int64_t i = 0; i <= grid.steps(); ++i) {
        double expected = -(run.traj.z[i] - run.traj.z[0]);  // gamma = 1
        CHECK(run.traj.R[i] == doctest::Approx(expected).epsilon(5e-11));
    }
}

TEST_CASE("mismatched driving grids are rejected") {
    auto model = make_model("ou-const");
    WienerGrid grid(3, 0, 64, 1, 1e-3);
    HierarchyRun l1 = run_level(*model, 0.064, 1, grid, vec1(0.0));
    WienerGrid other(3, 0, 32, 1, 2e-3);
    CHECK_THROWS_AS(run_level_from(*model, 0.064, 2, other, vec1(0.0), l1.traj),
                    GridMismatchError);
}

TEST_CASE("sentinel from an exploding driving trajectory cascades") {
    // quartic anti-well pushes outward; a tight guard trips mid-run
    auto model = make_model("double-well", {{"a", -1.0}, {"b", -1.0}, {"sigma", 0.5}});
    WienerGrid grid(7, 1, 4000, 1, 2.5e-4);
    HierarchyOptions opts;
    opts.guard = 5.0;
    auto runs = run_hierarchy(*model, 1.0 / 32.0, 2, grid, vec1(1.0), opts);
    REQUIRE(runs[0].sentinel);  // level 1 explodes under the inverted potential
    CHECK(runs[1].sentinel);    // and level 2 inherits the sentinel
    for (double v : runs[1].traj.q) CHECK(std::isfinite(v));
}

TEST_CASE("wrong specialization is rejected") {
    auto mag = make_model("magnetic-2d");
    WienerGrid grid(1, 0, 8, 2, 0.01);
    CHECK_THROWS_AS(
        run_level_special(SpecialKind::Scalar, *mag, 0.1, 2, grid, Vec::Zero(2)),
        WrongSpecializationError);
    CHECK_THROWS_AS(
        run_level_special(SpecialKind::FluctDiss, *mag, 0.1, 2, grid, Vec::Zero(2)),
        WrongSpecializationError);
    auto sin_model = make_model("scalar-sin");
    CHECK_THROWS_AS(
        run_level_special(SpecialKind::ConstGamma, *sin_model, 0.1, 2, grid, vec1(0.0)),
        WrongSpecializationError);
}
