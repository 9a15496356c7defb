#include "smallmass/linalg.hpp"

#include <cmath>
#include <vector>

namespace smallmass {

namespace {

// Diagonal Pade [6/6] coefficients; with ||A||_1 scaled below 0.25 the
// truncation error is at the level of double roundoff.
constexpr double kPade6[] = {1.0,
                             1.0 / 2.0,
                             5.0 / 44.0,
                             1.0 / 66.0,
                             1.0 / 792.0,
                             1.0 / 15840.0,
                             1.0 / 665280.0};

void check_square(const Mat& A, const char* who) {
    if (A.rows() != A.cols())
        throw Error(std::string(who) + ": matrix must be square");
    if (A.rows() < 1 || A.rows() > kMaxOrder)
        throw Error(std::string(who) + ": order out of supported range");
    if (!A.allFinite()) throw EvaluationError(std::string(who) + ": non-finite entries");
}

}  // namespace

Mat mat_exp(const Mat& A, double s) {
    check_square(A, "mat_exp");
    const int n = static_cast<int>(A.rows());
    if (!std::isfinite(s)) throw EvaluationError("mat_exp: non-finite scale");

    Mat B = s * A;
    const double norm1 = B.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 > 4096.0)
        throw std::range_error("mat_exp: ||sA|| too large (" + std::to_string(norm1) + ")");

    int squarings = 0;
    if (norm1 > 0.25) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.25)));
        B *= std::ldexp(1.0, -squarings);
    }

    // N = sum c_k B^k, D = sum (-1)^k c_k B^k, expm ~= D^{-1} N.
    Mat P = Mat::Identity(n, n);
    Mat N = kPade6[0] * P;
    Mat D = kPade6[0] * P;
    double sign = 1.0;
    for (int k = 1; k <= 6; ++k) {
        P = P * B;
        sign = -sign;
        N += kPade6[k] * P;
        D += sign * kPade6[k] * P;
    }
    Mat E = D.partialPivLu().solve(N);
    for (int i = 0; i < squarings; ++i) E = E * E;

    if (!E.allFinite()) throw std::range_error("mat_exp: overflow in squaring phase");
    return E;
}

LyapunovOperator::LyapunovOperator(const Mat& Gamma) : n_(static_cast<int>(Gamma.rows())), gamma_(Gamma) {
    check_square(Gamma, "LyapunovOperator");
    if (min_sym_eigenvalue(Gamma) <= 0.0)
        throw SingularMatrixError(
            "LyapunovOperator: symmetric part of Gamma is not positive definite; "
            "no unique solution");

    const int n = n_;
    const int ns = n * (n + 1) / 2;
    const int na = n * (n - 1) / 2;

    // Column (k,l) of the reduced operator is Gamma*B + B*Gamma^T applied to
    // the (anti)symmetric basis matrix B supported on (k,l).
    Mat sym_op(ns, ns);
    {
        int col = 0;
        Mat B(n, n), L(n, n);
        for (int k = 0; k < n; ++k) {
            for (int l = k; l < n; ++l, ++col) {
                B.setZero();
                B(k, l) = 1.0;
                B(l, k) = 1.0;
                L = Gamma * B + B * Gamma.transpose();
                int row = 0;
                for (int a = 0; a < n; ++a)
                    for (int b = a; b < n; ++b, ++row) sym_op(row, col) = L(a, b);
            }
        }
        sym_lu_.compute(sym_op);
    }
    if (na > 0) {
        Mat anti_op(na, na);
        int col = 0;
        Mat B(n, n), L(n, n);
        for (int k = 0; k < n; ++k) {
            for (int l = k + 1; l < n; ++l, ++col) {
                B.setZero();
                B(k, l) = 1.0;
                B(l, k) = -1.0;
                L = Gamma * B + B * Gamma.transpose();
                int row = 0;
                for (int a = 0; a < n; ++a)
                    for (int b = a + 1; b < n; ++b, ++row) anti_op(row, col) = L(a, b);
            }
        }
        anti_lu_.compute(anti_op);
    }
}

Mat LyapunovOperator::solve_sym(const Mat& Sym) const {
    const int n = n_;
    if (Sym.rows() != n || Sym.cols() != n)
        throw Error("solve_lyapunov: size mismatch");
    const double scale = Sym.cwiseAbs().maxCoeff();
    if ((Sym - Sym.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(scale, 1.0))
        throw Error("solve_lyapunov: right-hand side is not symmetric");

    auto unpack = [n](const Vec& x) {
        Mat M(n, n);
        int row = 0;
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b, ++row) {
                M(a, b) = x(row);
                M(b, a) = x(row);
            }
        return M;
    };
    auto pack = [n](const Mat& S) {
        Vec x(n * (n + 1) / 2);
        int row = 0;
        for (int a = 0; a < n; ++a)
            for (int b = a; b < n; ++b, ++row) x(row) = 0.5 * (S(a, b) + S(b, a));
        return x;
    };

    Mat M = unpack(sym_lu_.solve(pack(Sym)));
    // One refinement pass keeps the residual at roundoff even for
    // ill-scaled inputs.
    Mat R = Sym - (gamma_ * M + M * gamma_.transpose());
    M += unpack(sym_lu_.solve(pack(R)));
    if (!M.allFinite()) throw SingularMatrixError("solve_lyapunov: solve failed");
    return M;
}

Mat LyapunovOperator::solve(const Mat& C) const {
    const int n = n_;
    if (C.rows() != n || C.cols() != n) throw Error("LyapunovOperator::solve: size mismatch");
    Mat Cs = 0.5 * (C + C.transpose());
    Mat Ca = 0.5 * (C - C.transpose());
    Mat M = solve_sym(Cs);
    if (n > 1 && Ca.cwiseAbs().maxCoeff() > 0.0) {
        Vec rhs(n * (n - 1) / 2);
        int row = 0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b, ++row) rhs(row) = Ca(a, b);
        Vec x = anti_lu_.solve(rhs);
        int col = 0;
        for (int k = 0; k < n; ++k)
            for (int l = k + 1; l < n; ++l, ++col) {
                M(k, l) += x(col);
                M(l, k) -= x(col);
            }
    }
    if (!M.allFinite()) throw SingularMatrixError("LyapunovOperator::solve failed");
    return M;
}

Mat solve_lyapunov(const Mat& Gamma, const Mat& Sym) {
    return LyapunovOperator(Gamma).solve_sym(Sym);
}

Mat inv_derivative(const Mat& A, const Mat& dA) {
    check_square(A, "inv_derivative");
    Eigen::PartialPivLU<Mat> lu(A);
    if (std::abs(lu.determinant()) < 1e-300)
        throw SingularMatrixError("inv_derivative: singular matrix");
    Mat Ainv = lu.inverse();
    return -Ainv * dA * Ainv;
}

Mat inv_derivative_cached(const Mat& A_inv, const Mat& dA) {
    return -A_inv * dA * A_inv;
}

Mat lyap_derivative(const Mat& Gamma, const Mat& dGamma, const Mat& Sym,
                    const Mat& dSym, const Mat& M) {
    (void)Sym;
    LyapunovOperator op(Gamma);
    return lyap_derivative(op, dGamma, dSym, M);
}

Mat lyap_derivative(const LyapunovOperator& op, const Mat& dGamma,
                    const Mat& dSym, const Mat& M) {
    Mat rhs = dSym - dGamma * M - M * dGamma.transpose();
    return op.solve_sym(rhs);
}

double min_sym_eigenvalue(const Mat& A) {
    Mat S = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double operator_norm(const Mat& A) {
    if (A.rows() == 1 && A.cols() == 1) return std::abs(A(0, 0));
    return A.jacobiSvd().singularValues()(0);
}

}  // namespace smallmass
