#include <cmath>
#include <functional>
#include <set>

#include "smallmass/model.hpp"

namespace smallmass {

namespace {

double get_param(const std::map<std::string, double>& params,
                 const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& params,
                    const std::set<std::string>& known, const std::string& model) {
    for (const auto& [key, value] : params) {
        (void)value;
        if (!known.count(key))
            throw ParseError("model '" + model + "': unknown parameter '" + key + "'");
    }
}

DerivativeProvenance all_analytic() {
    DerivativeProvenance p;
    p.dgamma_dt = p.dgamma_dq = p.d2gamma_dqdq = p.d2gamma_dtdq = true;
    p.dpsi_dt = p.dpsi_dq = p.d2psi_dqdq = p.d3psi_dqdqdq = true;
    p.d2psi_dtdq = p.d3psi_dtdqdq = true;
    p.gradV = p.dsigma_dq = true;
    return p;
}

// Scalar model with drag g(q), constant diffusion, quadratic-or-quartic
// potential. The three scalar gallery entries differ only in these callables.
class ScalarModel : public Model {
  public:
    ScalarModel(std::string name, double lambda, double sigma0,
                std::function<double(double)> g, std::function<double(double)> gp,
                std::function<double(double)> gpp,
                std::function<double(double)> vgrad, bool gamma_const,
                bool time_indep = true)
        : name_(std::move(name)),
          lambda_(lambda),
          sigma0_(sigma0),
          g_(std::move(g)),
          gp_(std::move(gp)),
          gpp_(std::move(gpp)),
          vgrad_(std::move(vgrad)),
          gamma_const_(gamma_const),
          time_indep_(time_indep) {}

    int dim() const override { return 1; }
    int noise_dim() const override { return 1; }
    double spectral_floor() const override { return lambda_; }
    std::string name() const override { return name_; }

    ModelTraits traits() const override {
        ModelTraits t;
        t.scalar = true;
        t.psi_zero = true;
        t.gamma_state_independent = gamma_const_;
        t.time_independent = time_indep_;
        return t;
    }
    DerivativeProvenance derivative_provenance() const override { return all_analytic(); }

    void gamma(double, const Vec& q, Mat& out) const override {
        out.resize(1, 1);
        out(0, 0) = g_(q(0));
    }
    void dgamma_dt(double, const Vec&, Mat& out) const override { out = Mat::Zero(1, 1); }
    void dgamma_dq(double, const Vec& q, int, Mat& out) const override {
        out.resize(1, 1);
        out(0, 0) = gp_(q(0));
    }
    void d2gamma_dqdq(double, const Vec& q, int, int, Mat& out) const override {
        out.resize(1, 1);
        out(0, 0) = gpp_(q(0));
    }
    void d2gamma_dtdq(double, const Vec&, int, Mat& out) const override {
        out = Mat::Zero(1, 1);
    }

    double V(double, const Vec& q) const override { return v_of(q(0)); }
    void gradV(double, const Vec& q, Vec& out) const override {
        out.resize(1);
        out(0) = vgrad_(q(0));
    }
    void sigma(double, const Vec&, Mat& out) const override {
        out.resize(1, 1);
        out(0, 0) = sigma0_;
    }
    void dsigma_dq(double, const Vec&, int, Mat& out) const override { out = Mat::Zero(1, 1); }

    void scalar_coeffs(double, double q, ScalarCoeffs& out) const override {
        out.gamma = g_(q);
        out.dgamma_dq = gp_(q);
        out.d2gamma_dq2 = gpp_(q);
        out.dgamma_dt = 0.0;
        out.d2gamma_dtdq = 0.0;
        out.sigma = sigma0_;
        out.dsigma_dq = 0.0;
        out.force = -vgrad_(q);
    }

  protected:
    // V recovered from its gradient only where a test asks for the value;
    // overridden by entries that care.
    virtual double v_of(double) const { return 0.0; }

    std::string name_;
    double lambda_, sigma0_;
    std::function<double(double)> g_, gp_, gpp_, vgrad_;
    bool gamma_const_, time_indep_;
};

class ScalarSinModel final : public ScalarModel {
  public:
    ScalarSinModel(double g0, double g1, double sigma0, double kappa)
        : ScalarModel(
              "scalar-sin", g0 - std::abs(g1), sigma0,
              [g0, g1](double q) { return g0 + g1 * std::sin(q); },
              [g1](double q) { return g1 * std::cos(q); },
              [g1](double q) { return -g1 * std::sin(q); },
              [kappa](double q) { return kappa * q; }, false),
          kappa_(kappa) {
        if (lambda_ <= 0.0)
            throw ParseError("scalar-sin: need gamma0 > |gamma1| for a positive spectral floor");
    }

  protected:
    double v_of(double q) const override { return 0.5 * kappa_ * q * q; }
    double kappa_;
};

class ScalarExpModel final : public ScalarModel {
  public:
    ScalarExpModel(double beta, double sigma0, double kappa, double lambda)
        : ScalarModel(
              "scalar-exp", lambda, sigma0,
              [beta](double q) { return std::exp(beta * q); },
              [beta](double q) { return beta * std::exp(beta * q); },
              [beta](double q) { return beta * beta * std::exp(beta * q); },
              [kappa](double q) { return kappa * q; }, false),
          kappa_(kappa) {}

  protected:
    double v_of(double q) const override { return 0.5 * kappa_ * q * q; }
    double kappa_;
};

class OuConstModel final : public ScalarModel {
  public:
    OuConstModel(double g0, double sigma0, double kappa)
        : ScalarModel(
              "ou-const", g0, sigma0, [g0](double) { return g0; },
              [](double) { return 0.0; }, [](double) { return 0.0; },
              [kappa](double q) { return kappa * q; }, true),
          kappa_(kappa) {}

  protected:
    double v_of(double q) const override { return 0.5 * kappa_ * q * q; }
    double kappa_;
};

class DoubleWellModel final : public ScalarModel {
  public:
    DoubleWellModel(double g0, double sigma0, double a, double b)
        : ScalarModel(
              "double-well", g0, sigma0, [g0](double) { return g0; },
              [](double) { return 0.0; }, [](double) { return 0.0; },
              [a, b](double q) { return a * q * q * q - b * q; }, true),
          a_(a),
          b_(b) {}

  protected:
    double v_of(double q) const override {
        return 0.25 * a_ * q * q * q * q - 0.5 * b_ * q * q;
    }
    double a_, b_;
};

// Constant isotropic drag with a uniform magnetic field; the vector
// potential is linear in q, so all its second and higher derivatives vanish.
class Magnetic2dModel final : public Model {
  public:
    Magnetic2dModel(double g0, double B, double sigma0, double kappa)
        : g0_(g0), B_(B), sigma0_(sigma0), kappa_(kappa) {}

    int dim() const override { return 2; }
    int noise_dim() const override { return 2; }
    double spectral_floor() const override { return g0_; }
    std::string name() const override { return "magnetic-2d"; }

    ModelTraits traits() const override {
        ModelTraits t;
        t.psi_zero = false;
        t.time_independent = true;
        return t;
    }
    DerivativeProvenance derivative_provenance() const override { return all_analytic(); }

    void gamma(double, const Vec&, Mat& out) const override {
        out = g0_ * Mat::Identity(2, 2);
    }
    void dgamma_dt(double, const Vec&, Mat& out) const override { out = Mat::Zero(2, 2); }
    void dgamma_dq(double, const Vec&, int, Mat& out) const override { out = Mat::Zero(2, 2); }
    void d2gamma_dqdq(double, const Vec&, int, int, Mat& out) const override {
        out = Mat::Zero(2, 2);
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
        if (i == 0) {
            out(0) = 0.0;
            out(1) = 0.5 * B_;
        } else {
            out(0) = -0.5 * B_;
            out(1) = 0.0;
        }
    }
    void d2psi_dqdq(double, const Vec&, int, int, Vec& out) const override {
        out = Vec::Zero(2);
    }
    void d3psi_dqdqdq(double, const Vec&, int, int, int, Vec& out) const override {
        out = Vec::Zero(2);
    }
    void d2psi_dtdq(double, const Vec&, int, Vec& out) const override { out = Vec::Zero(2); }
    void d3psi_dtdqdq(double, const Vec&, int, int, Vec& out) const override {
        out = Vec::Zero(2);
    }

    double V(double, const Vec& q) const override { return 0.5 * kappa_ * q.squaredNorm(); }
    void gradV(double, const Vec& q, Vec& out) const override { out = kappa_ * q; }
    void sigma(double, const Vec&, Mat& out) const override {
        out = sigma0_ * Mat::Identity(2, 2);
    }
    void dsigma_dq(double, const Vec&, int, Mat& out) const override { out = Mat::Zero(2, 2); }

  private:
    double g0_, B_, sigma0_, kappa_;
};

}  // namespace

ModelPtr make_model(const std::string& name,
                    const std::map<std::string, double>& params) {
    const double sqrt2 = std::sqrt(2.0);
    if (name == "scalar-sin") {
        reject_unknown(params, {"gamma0", "gamma1", "sigma", "kappa"}, name);
        return std::make_shared<ScalarSinModel>(
            get_param(params, "gamma0", 2.0), get_param(params, "gamma1", 1.0),
            get_param(params, "sigma", sqrt2), get_param(params, "kappa", 1.0));
    }
    if (name == "scalar-exp") {
        reject_unknown(params, {"beta", "sigma", "kappa", "lambda"}, name);
        return std::make_shared<ScalarExpModel>(
            get_param(params, "beta", 1.0), get_param(params, "sigma", sqrt2),
            get_param(params, "kappa", 1.0), get_param(params, "lambda", 0.05));
    }
    if (name == "ou-const") {
        reject_unknown(params, {"gamma0", "sigma", "kappa"}, name);
        return std::make_shared<OuConstModel>(get_param(params, "gamma0", 1.0),
                                              get_param(params, "sigma", 1.0),
                                              get_param(params, "kappa", 1.0));
    }
    if (name == "double-well") {
        reject_unknown(params, {"gamma0", "sigma", "a", "b"}, name);
        return std::make_shared<DoubleWellModel>(
            get_param(params, "gamma0", 1.0), get_param(params, "sigma", 1.0),
            get_param(params, "a", 1.0), get_param(params, "b", 1.0));
    }
    if (name == "magnetic-2d") {
        reject_unknown(params, {"gamma0", "B", "sigma", "kappa"}, name);
        return std::make_shared<Magnetic2dModel>(
            get_param(params, "gamma0", 1.0), get_param(params, "B", 1.0),
            get_param(params, "sigma", 1.0), get_param(params, "kappa", 1.0));
    }
    throw ParseError("unknown model '" + name + "'");
}

}  // namespace smallmass
