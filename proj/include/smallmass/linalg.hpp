#pragma once

#include <Eigen/Dense>

#include "smallmass/errors.hpp"

namespace smallmass {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Maximum matrix order the dense kernels are designed for.
inline constexpr int kMaxOrder = 16;

/// e^{sA} by scaling-and-squaring with a diagonal Pade kernel.
/// Relative error <= 1e-12 for ||sA|| <= 50; throws std::range_error when the
/// scaled norm is large enough to overflow.
Mat mat_exp(const Mat& A, double s = 1.0);

/// Pre-factored Lyapunov operator X -> Gamma X + X Gamma^T for repeated
/// solves against a fixed Gamma. The symmetric part of Gamma must be
/// positive definite (this is what guarantees a unique solution).
class LyapunovOperator {
  public:
    explicit LyapunovOperator(const Mat& Gamma);

    /// Unique symmetric M with Gamma M + M Gamma^T = Sym (Sym symmetric).
    Mat solve_sym(const Mat& Sym) const;

    /// Unique M with Gamma M + M Gamma^T = C for arbitrary C. Solved by
    /// splitting C into symmetric and antisymmetric parts; each part's
    /// solution inherits the same symmetry.
    Mat solve(const Mat& C) const;

    int order() const { return n_; }

  private:
    int n_;
    Mat gamma_;
    // Dense operators on the n(n+1)/2 symmetric and n(n-1)/2 antisymmetric
    // coordinates; tiny orders keep a direct LU cheap and exact.
    Eigen::PartialPivLU<Mat> sym_lu_;
    Eigen::PartialPivLU<Mat> anti_lu_;
};

/// One-shot convenience wrapper around LyapunovOperator::solve_sym.
/// Residual ||Gamma M + M Gamma^T - Sym|| <= 1e-10 ||Sym||.
Mat solve_lyapunov(const Mat& Gamma, const Mat& Sym);

/// Derivative of a matrix inverse: returns -A^{-1} dA A^{-1}.
Mat inv_derivative(const Mat& A, const Mat& dA);

/// Overload reusing a precomputed inverse.
Mat inv_derivative_cached(const Mat& A_inv, const Mat& dA);

/// Derivative of the Lyapunov solution M(Gamma, Sym): returns dM solving
///   Gamma dM + dM Gamma^T = dSym - dGamma M - M dGamma^T.
Mat lyap_derivative(const Mat& Gamma, const Mat& dGamma, const Mat& Sym,
                    const Mat& dSym, const Mat& M);

/// Same, against a pre-factored operator.
Mat lyap_derivative(const LyapunovOperator& op, const Mat& dGamma,
                    const Mat& dSym, const Mat& M);

/// Smallest eigenvalue of the symmetric part of A.
double min_sym_eigenvalue(const Mat& A);

/// l2 operator norm (largest singular value).
double operator_norm(const Mat& A);

}  // namespace smallmass
