#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "smallmass/linalg.hpp"

namespace smallmass {

/// Structural properties a model declares about itself; they gate the
/// specialized integration paths.
struct ModelTraits {
    bool scalar = false;                  // n == 1, psi == 0
    bool psi_zero = true;                 // no vector potential
    bool gamma_state_independent = false; // drag does not depend on q
    bool time_independent = false;        // no explicit t dependence anywhere
};

/// Which derivative suppliers are analytic (true) as opposed to the
/// finite-difference fallbacks inherited from the base class.
struct DerivativeProvenance {
    bool dgamma_dt = false;
    bool dgamma_dq = false;
    bool d2gamma_dqdq = false;
    bool d2gamma_dtdq = false;
    bool dpsi_dt = false;
    bool dpsi_dq = false;
    bool d2psi_dqdq = false;
    bool d3psi_dqdqdq = false;
    bool d2psi_dtdq = false;
    bool d3psi_dtdqdq = false;
    bool gradV = false;
    bool dsigma_dq = false;
};

/// Coefficient values a scalar (n == 1, psi == 0) model supplies in one call;
/// the scalar integration kernels live on this struct.
struct ScalarCoeffs {
    double gamma = 0.0;
    double dgamma_dq = 0.0;
    double d2gamma_dq2 = 0.0;
    double dgamma_dt = 0.0;
    double d2gamma_dtdq = 0.0;
    double sigma = 0.0;
    double dsigma_dq = 0.0;
    double force = 0.0;  // -dV/dq + F_ext
};

/// Problem data for the Langevin system: drag gamma (symmetric, eigenvalues
/// >= spectral_floor), vector potential psi, potential V, external force, and
/// diffusion sigma, together with the derivative suppliers the hierarchy
/// needs. Every virtual derivative has a central finite-difference default
/// (step max(1e-5, 1e-5*|q|) per coordinate); analytic overrides should be
/// reported through derivative_provenance(). All evaluations must be pure:
/// they are called concurrently from Monte Carlo workers.
class Model {
  public:
    virtual ~Model() = default;

    virtual int dim() const = 0;        // n
    virtual int noise_dim() const = 0;  // k
    virtual double spectral_floor() const = 0;

    virtual ModelTraits traits() const { return {}; }
    virtual DerivativeProvenance derivative_provenance() const { return {}; }
    virtual std::string name() const { return "custom"; }

    // --- drag ---
    virtual void gamma(double t, const Vec& q, Mat& out) const = 0;
    virtual void dgamma_dt(double t, const Vec& q, Mat& out) const;
    virtual void dgamma_dq(double t, const Vec& q, int i, Mat& out) const;
    virtual void d2gamma_dqdq(double t, const Vec& q, int i, int j, Mat& out) const;
    virtual void d2gamma_dtdq(double t, const Vec& q, int i, Mat& out) const;

    // --- vector potential (zero by default) ---
    virtual void psi(double t, const Vec& q, Vec& out) const;
    virtual void dpsi_dt(double t, const Vec& q, Vec& out) const;
    virtual void dpsi_dq(double t, const Vec& q, int i, Vec& out) const;
    virtual void d2psi_dqdq(double t, const Vec& q, int i, int j, Vec& out) const;
    virtual void d3psi_dqdqdq(double t, const Vec& q, int i, int j, int l, Vec& out) const;
    virtual void d2psi_dtdq(double t, const Vec& q, int i, Vec& out) const;
    virtual void d3psi_dtdqdq(double t, const Vec& q, int i, int j, Vec& out) const;

    // --- potential and forces ---
    virtual double V(double t, const Vec& q) const;
    virtual void gradV(double t, const Vec& q, Vec& out) const;
    virtual void F_ext(double t, const Vec& q, Vec& out) const;

    // --- diffusion ---
    virtual void sigma(double t, const Vec& q, Mat& out) const = 0;
    virtual void dsigma_dq(double t, const Vec& q, int i, Mat& out) const;

    /// One-call coefficient evaluation for scalar models; only valid when
    /// traits().scalar. The default assembles from the matrix interface.
    virtual void scalar_coeffs(double t, double q, ScalarCoeffs& out) const;

  protected:
    static double fd_step(double x) {
        double ax = x < 0 ? -x : x;
        return 1e-5 > 1e-5 * ax ? 1e-5 : 1e-5 * ax;
    }
};

using ModelPtr = std::shared_ptr<const Model>;

/// Values and partials of the effective drag
///   tg_ik = gamma_ik + d_k psi_i - d_i psi_k
/// and of its inverse at one point (t, q). `order` controls how deep the
/// derivative tables go: 0 = values only, 1 = first partials, 2 = also the
/// second and mixed partials the remainder terms need.
struct DerivativeBundle {
    int n = 0;
    int order = 0;
    bool analytic = true;

    Mat tg, tg_inv;
    Mat dtg_dt, dtginv_dt;
    std::vector<Mat> dtg_dq, dtginv_dq;       // [i]
    std::vector<Mat> d2tg_dqdq, d2tginv_dqdq; // packed upper triangle (i <= j)
    std::vector<Mat> d2tg_dtdq, d2tginv_dtdq; // [i]

    int sym_index(int i, int j) const {
        if (i > j) std::swap(i, j);
        return i * n - i * (i - 1) / 2 + (j - i);
    }
    const Mat& second_dq(int i, int j) const { return d2tginv_dqdq[sym_index(i, j)]; }
};

/// The contraction T^{i,ab} of the drag-derivative tensor with the
/// exponential-kernel integral, plus its spatial and time derivatives,
/// obtained from differentiated Lyapunov solves.
struct QGTensor {
    int n = 0;
    bool analytic = true;
    std::vector<Mat> T;                   // [i] -> n x n in (a, b)
    std::vector<std::vector<Mat>> dT_dq;  // [c][i]
    std::vector<Mat> dT_dt;               // [i]
};

/// Evaluate the effective drag and its derivative tables. Throws
/// DegenerateDragError if the smallest eigenvalue of the symmetric part
/// falls below spectral_floor()/2, EvaluationError on non-finite fields.
DerivativeBundle eval_tilde_gamma(const Model& model, double t, const Vec& q,
                                  int order = 2);

/// Total force -d_t psi - grad V + F_ext.
Vec total_force(const Model& model, double t, const Vec& q);

/// Diffusion matrix sigma(t, q).
Mat sigma_matrix(const Model& model, double t, const Vec& q);

/// Noise covariance Sigma = sigma sigma^T.
Mat noise_covariance(const Model& model, double t, const Vec& q);

/// The drift correction induced by state-dependent drag/noise, computed from
/// the drag-derivative contraction with the Lyapunov solution of
/// (tg, Sigma). With `fluctuation_dissipation_shortcut` the simplified
/// divergence form is used instead; this requires psi == 0 and
/// Sigma proportional to gamma and throws WrongSpecializationError otherwise.
Vec noise_induced_drift(const Model& model, double t, const Vec& q,
                        bool fluctuation_dissipation_shortcut = false);

/// Same, reusing an existing first-order bundle.
Vec noise_induced_drift(const DerivativeBundle& bundle, const Mat& Sigma);

QGTensor qg_tensor(const Model& model, double t, const Vec& q);
QGTensor qg_tensor(const DerivativeBundle& bundle);

/// Model with all fields smoothly truncated outside the ball of radius r:
/// inside radius r the fields are bitwise identical to the input model's,
/// outside 2r the potential/forces vanish and the drag is the constant
/// spectral-floor multiple of the identity.
ModelPtr cutoff_model(ModelPtr model, double r);

/// Builtin model gallery; throws ParseError for unknown names or parameters.
ModelPtr make_model(const std::string& name,
                    const std::map<std::string, double>& params = {});

}  // namespace smallmass
