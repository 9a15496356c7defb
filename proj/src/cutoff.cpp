#include <array>
#include <cmath>

#include "smallmass/model.hpp"

namespace smallmass {

namespace {

// Truncated Taylor arithmetic (value + three derivatives) used to evaluate
// the bump profile and its derivatives without hand-expanded algebra.
struct Jet3 {
    std::array<double, 4> v{};  // f, f', f'', f'''

    static Jet3 seed(double x) { return {{x, 1.0, 0.0, 0.0}}; }
    static Jet3 constant(double c) { return {{c, 0.0, 0.0, 0.0}}; }

    friend Jet3 operator+(const Jet3& a, const Jet3& b) {
        Jet3 r;
        for (int i = 0; i < 4; ++i) r.v[i] = a.v[i] + b.v[i];
        return r;
    }
    friend Jet3 operator-(const Jet3& a, const Jet3& b) {
        Jet3 r;
        for (int i = 0; i < 4; ++i) r.v[i] = a.v[i] - b.v[i];
        return r;
    }
    friend Jet3 operator*(const Jet3& a, const Jet3& b) {
        // Leibniz with binomial weights 1, 3, 3, 1 at third order.
        Jet3 r;
        r.v[0] = a.v[0] * b.v[0];
        r.v[1] = a.v[1] * b.v[0] + a.v[0] * b.v[1];
        r.v[2] = a.v[2] * b.v[0] + 2.0 * a.v[1] * b.v[1] + a.v[0] * b.v[2];
        r.v[3] = a.v[3] * b.v[0] + 3.0 * a.v[2] * b.v[1] + 3.0 * a.v[1] * b.v[2] +
                 a.v[0] * b.v[3];
        return r;
    }
    friend Jet3 operator/(const Jet3& f, const Jet3& g) {
        // Solve h*g = f order by order.
        Jet3 h;
        h.v[0] = f.v[0] / g.v[0];
        h.v[1] = (f.v[1] - h.v[0] * g.v[1]) / g.v[0];
        h.v[2] = (f.v[2] - h.v[0] * g.v[2] - 2.0 * h.v[1] * g.v[1]) / g.v[0];
        h.v[3] = (f.v[3] - h.v[0] * g.v[3] - 3.0 * h.v[1] * g.v[2] -
                  3.0 * h.v[2] * g.v[1]) /
                 g.v[0];
        return h;
    }
};

Jet3 jet_exp(const Jet3& f) {
    Jet3 e;
    e.v[0] = std::exp(f.v[0]);
    e.v[1] = f.v[1] * e.v[0];
    e.v[2] = f.v[2] * e.v[0] + f.v[1] * e.v[1];
    e.v[3] = f.v[3] * e.v[0] + 2.0 * f.v[2] * e.v[1] + f.v[1] * e.v[2];
    return e;
}

// Smooth profile: 1 on s <= 1, 0 on s >= 2, exp-based transition between.
// Returns value and first three derivatives with respect to s.
Jet3 bump_profile(double s) {
    if (s <= 1.0) return Jet3::constant(1.0);
    if (s >= 2.0) return Jet3::constant(0.0);
    Jet3 x = Jet3::seed(s);
    Jet3 one = Jet3::constant(1.0);
    Jet3 two = Jet3::constant(2.0);
    Jet3 a = jet_exp(Jet3::constant(0.0) - one / (two - x));  // exp(-1/(2-s))
    Jet3 b = jet_exp(Jet3::constant(0.0) - one / (x - one));  // exp(-1/(s-1))
    return a / (a + b);
}

// chi_r and its q-derivatives up to third order, assembled from the radial
// profile. Inside the unit shell everything short-circuits to the constants.
struct BumpEval {
    double value = 1.0;
    bool inside = true;   // chi == 1 and all derivatives vanish
    bool outside = false; // chi == 0 and all derivatives vanish
    Vec grad;              // d_i chi
    Mat hess;              // d_i d_j chi
    std::vector<Mat> third; // [k](i,j) = d_k d_i d_j chi
};

BumpEval eval_bump(const Vec& q, double r, bool need_third) {
    const int n = static_cast<int>(q.size());
    BumpEval out;
    const double u = q.norm();
    const double s = u / r;
    if (s <= 1.0) return out;
    out.inside = false;
    if (s >= 2.0) {
        out.value = 0.0;
        out.outside = true;
        return out;
    }

    Jet3 g = bump_profile(s);
    const double f1 = g.v[1] / r;
    const double f2 = g.v[2] / (r * r);
    const double f3 = g.v[3] / (r * r * r);
    out.value = g.v[0];

    out.grad = (f1 / u) * q;
    out.hess.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double qq = q(i) * q(j);
            out.hess(i, j) = f2 * qq / (u * u) +
                             f1 * ((i == j ? 1.0 : 0.0) / u - qq / (u * u * u));
        }
    if (!need_third) return out;
    out.third.assign(n, Mat(n, n));
    const double u2 = u * u, u3 = u2 * u, u4 = u2 * u2, u5 = u4 * u;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double dij = (i == j), dik = (i == k), djk = (j == k);
                double qqq = q(i) * q(j) * q(k);
                double sum_dq = dik * q(j) + djk * q(i) + dij * q(k);
                out.third[k](i, j) = f3 * qqq / u3 +
                                     f2 * (sum_dq / u2 - 3.0 * qqq / u4) +
                                     f1 * (3.0 * qqq / u5 - sum_dq / u3);
            }
    return out;
}

// Wraps a model with the radius-r truncation: V, F_ext, psi are multiplied
// by chi_r; the drag interpolates to the constant spectral-floor matrix.
// All derivative suppliers are rebuilt by the product rule, so the wrapped
// model keeps analytic provenance where the base model has it.
class CutoffModel final : public Model {
  public:
    CutoffModel(ModelPtr base, double r) : base_(std::move(base)), r_(r) {
        if (!(r > 0.0)) throw Error("cutoff_model: radius must be positive");
    }

    int dim() const override { return base_->dim(); }
    int noise_dim() const override { return base_->noise_dim(); }
    double spectral_floor() const override { return base_->spectral_floor(); }
    std::string name() const override { return base_->name() + "+cutoff"; }

    ModelTraits traits() const override {
        ModelTraits t = base_->traits();
        t.gamma_state_independent = false;  // chi_r reintroduces q dependence
        return t;
    }
    DerivativeProvenance derivative_provenance() const override {
        return base_->derivative_provenance();
    }

    void gamma(double t, const Vec& q, Mat& out) const override {
        base_->gamma(t, q, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        const double lam = base_->spectral_floor();
        if (c.outside) {
            out = lam * Mat::Identity(dim(), dim());
            return;
        }
        out = c.value * out + (1.0 - c.value) * lam * Mat::Identity(dim(), dim());
    }
    void dgamma_dt(double t, const Vec& q, Mat& out) const override {
        base_->dgamma_dt(t, q, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim(), dim());
            return;
        }
        out *= c.value;
    }
    void dgamma_dq(double t, const Vec& q, int i, Mat& out) const override {
        base_->dgamma_dq(t, q, i, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim(), dim());
            return;
        }
        Mat g(dim(), dim());
        base_->gamma(t, q, g);
        const double lam = base_->spectral_floor();
        out = c.value * out +
              c.grad(i) * (g - lam * Mat::Identity(dim(), dim()));
    }
    void d2gamma_dqdq(double t, const Vec& q, int i, int j, Mat& out) const override {
        base_->d2gamma_dqdq(t, q, i, j, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim(), dim());
            return;
        }
        Mat g(dim(), dim()), gi(dim(), dim()), gj(dim(), dim());
        base_->gamma(t, q, g);
        base_->dgamma_dq(t, q, i, gi);
        base_->dgamma_dq(t, q, j, gj);
        const double lam = base_->spectral_floor();
        out = c.value * out + c.grad(i) * gj + c.grad(j) * gi +
              c.hess(i, j) * (g - lam * Mat::Identity(dim(), dim()));
    }
    void d2gamma_dtdq(double t, const Vec& q, int i, Mat& out) const override {
        base_->d2gamma_dtdq(t, q, i, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim(), dim());
            return;
        }
        Mat gt(dim(), dim());
        base_->dgamma_dt(t, q, gt);
        out = c.value * out + c.grad(i) * gt;
    }

    void psi(double t, const Vec& q, Vec& out) const override {
        base_->psi(t, q, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        out *= c.value;
    }
    void dpsi_dt(double t, const Vec& q, Vec& out) const override {
        base_->dpsi_dt(t, q, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        out *= c.value;
    }
    void dpsi_dq(double t, const Vec& q, int i, Vec& out) const override {
        base_->dpsi_dq(t, q, i, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        Vec p(dim());
        base_->psi(t, q, p);
        out = c.value * out + c.grad(i) * p;
    }
    void d2psi_dqdq(double t, const Vec& q, int i, int j, Vec& out) const override {
        base_->d2psi_dqdq(t, q, i, j, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        Vec p(dim()), pi(dim()), pj(dim());
        base_->psi(t, q, p);
        base_->dpsi_dq(t, q, i, pi);
        base_->dpsi_dq(t, q, j, pj);
        out = c.value * out + c.grad(i) * pj + c.grad(j) * pi + c.hess(i, j) * p;
    }
    void d3psi_dqdqdq(double t, const Vec& q, int i, int j, int l, Vec& out) const override {
        base_->d3psi_dqdqdq(t, q, i, j, l, out);
        BumpEval c = eval_bump(q, r_, true);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        Vec p(dim()), pi(dim()), pj(dim()), pl(dim()), pij(dim()), pil(dim()), pjl(dim());
        base_->psi(t, q, p);
        base_->dpsi_dq(t, q, i, pi);
        base_->dpsi_dq(t, q, j, pj);
        base_->dpsi_dq(t, q, l, pl);
        base_->d2psi_dqdq(t, q, i, j, pij);
        base_->d2psi_dqdq(t, q, i, l, pil);
        base_->d2psi_dqdq(t, q, j, l, pjl);
        out = c.value * out + c.grad(i) * pjl + c.grad(j) * pil + c.grad(l) * pij +
              c.hess(i, j) * pl + c.hess(i, l) * pj + c.hess(j, l) * pi +
              c.third[i](j, l) * p;
    }
    void d2psi_dtdq(double t, const Vec& q, int i, Vec& out) const override {
        base_->d2psi_dtdq(t, q, i, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        Vec pt(dim());
        base_->dpsi_dt(t, q, pt);
        out = c.value * out + c.grad(i) * pt;
    }
    void d3psi_dtdqdq(double t, const Vec& q, int i, int j, Vec& out) const override {
        base_->d3psi_dtdqdq(t, q, i, j, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        Vec pt(dim()), pti(dim()), ptj(dim());
        base_->dpsi_dt(t, q, pt);
        base_->d2psi_dtdq(t, q, i, pti);
        base_->d2psi_dtdq(t, q, j, ptj);
        out = c.value * out + c.grad(i) * ptj + c.grad(j) * pti + c.hess(i, j) * pt;
    }

    double V(double t, const Vec& q) const override {
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return base_->V(t, q);
        if (c.outside) return 0.0;
        return c.value * base_->V(t, q);
    }
    void gradV(double t, const Vec& q, Vec& out) const override {
        base_->gradV(t, q, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        out = c.value * out + base_->V(t, q) * c.grad;
    }
    void F_ext(double t, const Vec& q, Vec& out) const override {
        base_->F_ext(t, q, out);
        BumpEval c = eval_bump(q, r_, false);
        if (c.inside) return;
        if (c.outside) {
            out.setZero(dim());
            return;
        }
        out *= c.value;
    }

    void sigma(double t, const Vec& q, Mat& out) const override {
        base_->sigma(t, q, out);
    }
    void dsigma_dq(double t, const Vec& q, int i, Mat& out) const override {
        base_->dsigma_dq(t, q, i, out);
    }

    void scalar_coeffs(double t, double q, ScalarCoeffs& out) const override {
        base_->scalar_coeffs(t, q, out);
        Vec qv(1);
        qv(0) = q;
        BumpEval c = eval_bump(qv, r_, false);
        if (c.inside) return;
        const double lam = base_->spectral_floor();
        if (c.outside) {
            out.gamma = lam;
            out.dgamma_dq = 0.0;
            out.d2gamma_dq2 = 0.0;
            out.dgamma_dt = 0.0;
            out.d2gamma_dtdq = 0.0;
            out.force = 0.0;
            return;
        }
        const double chi = c.value, chi1 = c.grad(0), chi2 = c.hess(0, 0);
        ScalarCoeffs base = out;
        out.gamma = chi * base.gamma + (1.0 - chi) * lam;
        out.dgamma_dq = chi * base.dgamma_dq + chi1 * (base.gamma - lam);
        out.d2gamma_dq2 = chi * base.d2gamma_dq2 + 2.0 * chi1 * base.dgamma_dq +
                          chi2 * (base.gamma - lam);
        out.dgamma_dt = chi * base.dgamma_dt;
        out.d2gamma_dtdq = chi * base.d2gamma_dtdq + chi1 * base.dgamma_dt;
        out.force = chi * base.force - chi1 * base_->V(t, qv);
        // sigma is not truncated.
    }

  private:
    ModelPtr base_;
    double r_;
};

}  // namespace

ModelPtr cutoff_model(ModelPtr model, double r) {
    return std::make_shared<CutoffModel>(std::move(model), r);
}

}  // namespace smallmass
