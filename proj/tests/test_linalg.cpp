#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "smallmass/linalg.hpp"
#include "smallmass/noise.hpp"

using namespace smallmass;

namespace {

Mat random_matrix(int n, std::uint64_t key, double scale = 1.0) {
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            A(i, j) = scale * keyed_normal(key, 7, i, static_cast<std::uint32_t>(j));
    return A;
}

// Random matrix whose symmetric part is at least floor_shift * I.
Mat random_spd_plus(int n, std::uint64_t key, double floor_shift) {
    Mat A = random_matrix(n, key);
    return Mat(A + Mat::Identity(n, n) * (operator_norm(A) + floor_shift));
}

// Simpson quadrature of int_0^inf exp(-z G) Sym exp(-z G^T) dz, truncated
// where exp(-lambda z) < 1e-12. Independent route against the direct solver.
Mat lyapunov_quadrature(const Mat& G, const Mat& Sym) {
    const double lambda = min_sym_eigenvalue(G);
    REQUIRE(lambda > 0.0);
    const double zmax = -std::log(1e-12) / lambda;
    const double target = std::min(0.005, 0.02 / std::max(1.0, operator_norm(G)));
    std::int64_t steps = static_cast<std::int64_t>(std::ceil(zmax / target));
    if (steps % 2) ++steps;
    const double h = zmax / static_cast<double>(steps);
    Mat Estep = mat_exp(G, -h);
    Mat P = Mat::Identity(G.rows(), G.cols());
    Mat acc = Sym;  // f(0), weight 1
    for (std::int64_t i = 1; i <= steps; ++i) {
        P = P * Estep;
        Mat f = P * Sym * P.transpose();
        double w = (i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * f;
    }
    return Mat(acc * (h / 3.0));
}

}  // namespace

TEST_CASE("mat_exp basics") {
    Mat Z = Mat::Zero(3, 3);
    CHECK((mat_exp(Z, 1.0) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

    Mat D = Mat::Zero(2, 2);
    D(0, 0) = -1.0;
    D(1, 1) = -2.0;
    Mat E = mat_exp(D, 1.0);
    CHECK(E(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
    CHECK(E(1, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
    CHECK(std::abs(E(0, 1)) == 0.0);

    Mat A = random_matrix(3, 11);
    Mat I = mat_exp(A, 1.0) * mat_exp(A, -1.0);
    CHECK((I - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mat_exp semigroup and range") {
    Mat A = random_matrix(4, 23);
    Mat lhs = mat_exp(A, 0.7) * mat_exp(A, 0.3);
    Mat rhs = mat_exp(A, 1.0);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);

    Mat big = Mat::Identity(2, 2) * 10000.0;
    CHECK_THROWS_AS(mat_exp(big, 1.0), std::range_error);
}

TEST_CASE("mat_exp accuracy against scalar exp") {
    for (double s : {-50.0, -10.0, -0.3, 0.2, 8.0, 50.0}) {
        Mat A(1, 1);
        A(0, 0) = 1.0;
        CHECK(mat_exp(A, s)(0, 0) == doctest::Approx(std::exp(s)).epsilon(1e-12));
    }
}

TEST_CASE("solve_lyapunov scalar and identity cases") {
    Mat G(1, 1), S(1, 1);
    G(0, 0) = 1.0;
    S(0, 0) = 2.0;
    CHECK(solve_lyapunov(G, S)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

    Mat I2 = Mat::Identity(2, 2);
    Mat M = solve_lyapunov(I2, I2);
    CHECK((M - 0.5 * I2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("solve_lyapunov hand-derived 2x2") {
    Mat G(2, 2);
    G << 2, 1, -1, 1;
    Mat M = solve_lyapunov(G, Mat::Identity(2, 2));
    Mat expected(2, 2);
    expected << 5.0 / 18.0, -1.0 / 18.0, -1.0 / 18.0, 4.0 / 9.0;
    CHECK((M - expected).cwiseAbs().maxCoeff() < 1e-12);

    Mat quad = lyapunov_quadrature(G, Mat::Identity(2, 2));
    CHECK((M - quad).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("solve_lyapunov residual, symmetry, quadrature on random instances") {
    for (int trial = 0; trial < 50; ++trial) {
        int n = 1 + trial % 6;
        Mat G = random_spd_plus(n, 100 + trial, 0.5);
        Mat B = random_matrix(n, 200 + trial);
        Mat Sym = 0.5 * (B + B.transpose());
        Mat M = solve_lyapunov(G, Sym);
        CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        double resid = (G * M + M * G.transpose() - Sym).cwiseAbs().maxCoeff();
        CHECK(resid <= 1e-10 * std::max(1.0, Sym.cwiseAbs().maxCoeff()));
        if (trial % 10 == 0) {
            Mat quad = lyapunov_quadrature(G, Sym);
            CHECK((M - quad).cwiseAbs().maxCoeff() <
                  1e-6 * std::max(1.0, M.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("solve_lyapunov rejects indefinite drag and asymmetric rhs") {
    Mat G(2, 2);
    G << 1, 0, 0, -1;
    CHECK_THROWS_AS(solve_lyapunov(G, Mat::Identity(2, 2)), SingularMatrixError);

    Mat ok = Mat::Identity(2, 2);
    Mat bad(2, 2);
    bad << 0, 1, -1, 0;
    CHECK_THROWS_AS(solve_lyapunov(ok, bad), Error);
}

TEST_CASE("general lyapunov solve handles non-symmetric right-hand side") {
    for (int trial = 0; trial < 20; ++trial) {
        int n = 2 + trial % 4;
        Mat G = random_spd_plus(n, 300 + trial, 0.5);
        Mat C = random_matrix(n, 400 + trial);
        LyapunovOperator op(G);
        Mat Y = op.solve(C);
        double resid = (G * Y + Y * G.transpose() - C).cwiseAbs().maxCoeff();
        CHECK(resid <= 1e-10 * std::max(1.0, C.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("inv_derivative") {
    Mat A(1, 1), dA(1, 1);
    A(0, 0) = 2.0;
    dA(0, 0) = 1.0;
    CHECK(inv_derivative(A, dA)(0, 0) == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(inv_derivative(A, Mat::Zero(1, 1))(0, 0) == 0.0);

    Mat B = random_spd_plus(2, 17, 1.0);
    Mat dB = random_matrix(2, 18);
    const double h = 1e-6;
    Mat fd = ((B + h * dB).inverse() - (B - h * dB).inverse()) / (2.0 * h);
    CHECK((inv_derivative(B, dB) - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lyap_derivative") {
    Mat G(1, 1), S(1, 1), dG(1, 1), dS(1, 1);
    G(0, 0) = 1.0;
    S(0, 0) = 2.0;
    dG(0, 0) = 1.0;
    dS(0, 0) = 0.0;
    Mat M = solve_lyapunov(G, S);
    CHECK(lyap_derivative(G, dG, S, dS, M)(0, 0) == doctest::Approx(-1.0).epsilon(1e-13));
    CHECK(lyap_derivative(G, Mat::Zero(1, 1), S, Mat::Zero(1, 1), M)(0, 0) == 0.0);

    Mat G2 = random_spd_plus(2, 55, 1.0);
    Mat B = random_matrix(2, 56);
    Mat Sym = 0.5 * (B + B.transpose());
    Mat dG2 = random_matrix(2, 57, 0.5);
    Mat dB = random_matrix(2, 58, 0.5);
    Mat dSym = 0.5 * (dB + dB.transpose());
    Mat M2 = solve_lyapunov(G2, Sym);
    Mat dM = lyap_derivative(G2, dG2, Sym, dSym, M2);
    const double h = 1e-6;
    Mat fd = (solve_lyapunov(G2 + h * dG2, Sym + h * dSym) -
              solve_lyapunov(G2 - h * dG2, Sym - h * dSym)) /
             (2.0 * h);
    CHECK((dM - fd).cwiseAbs().maxCoeff() < 1e-5);
}
