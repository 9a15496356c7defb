#include "smallmass/model.hpp"

#include <cmath>

namespace smallmass {

// ---------------------------------------------------------------------------
// Finite-difference fallbacks
// ---------------------------------------------------------------------------

void Model::dgamma_dt(double t, const Vec& q, Mat& out) const {
    const double h = fd_step(t);
    Mat plus(dim(), dim()), minus(dim(), dim());
    gamma(t + h, q, plus);
    gamma(t - h, q, minus);
    out = (plus - minus) / (2.0 * h);
}

void Model::dgamma_dq(double t, const Vec& q, int i, Mat& out) const {
    const double h = fd_step(q.norm());
    Vec qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    Mat plus(dim(), dim()), minus(dim(), dim());
    gamma(t, qp, plus);
    gamma(t, qm, minus);
    out = (plus - minus) / (2.0 * h);
}

void Model::d2gamma_dqdq(double t, const Vec& q, int i, int j, Mat& out) const {
    const double h = fd_step(q.norm());
    Vec qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    Mat plus(dim(), dim()), minus(dim(), dim());
    dgamma_dq(t, qp, j, plus);
    dgamma_dq(t, qm, j, minus);
    out = (plus - minus) / (2.0 * h);
}

void Model::d2gamma_dtdq(double t, const Vec& q, int i, Mat& out) const {
    const double h = fd_step(t);
    Mat plus(dim(), dim()), minus(dim(), dim());
    dgamma_dq(t + h, q, i, plus);
    dgamma_dq(t - h, q, i, minus);
    out = (plus - minus) / (2.0 * h);
}

void Model::psi(double, const Vec&, Vec& out) const { out.setZero(dim()); }
void Model::dpsi_dt(double t, const Vec& q, Vec& out) const {
    if (traits().psi_zero) {
        out.setZero(dim());
        return;
    }
    const double h = fd_step(t);
    Vec plus(dim()), minus(dim());
    psi(t + h, q, plus);
    psi(t - h, q, minus);
    out = (plus - minus) / (2.0 * h);
}
void Model::dpsi_dq(double t, const Vec& q, int i, Vec& out) const {
    if (traits().psi_zero) {
        out.setZero(dim());
        return;
    }
    const double h = fd_step(q.norm());
    Vec qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    Vec plus(dim()), minus(dim());
    psi(t, qp, plus);
    psi(t, qm, minus);
    out = (plus - minus) / (2.0 * h);
}
void Model::d2psi_dqdq(double t, const Vec& q, int i, int j, Vec& out) const {
    if (traits().psi_zero) {
        out.setZero(dim());
        return;
    }
    const double h = fd_step(q.norm());
    Vec qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    Vec plus(dim()), minus(dim());
    dpsi_dq(t, qp, j, plus);
    dpsi_dq(t, qm, j, minus);
    out = (plus - minus) / (2.0 * h);
}
void Model::d3psi_dqdqdq(double t, const Vec& q, int i, int j, int l, Vec& out) const {
    if (traits().psi_zero) {
        out.setZero(dim());
        return;
    }
    const double h = fd_step(q.norm());
    Vec qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    Vec plus(dim()), minus(dim());
    d2psi_dqdq(t, qp, j, l, plus);
    d2psi_dqdq(t, qm, j, l, minus);
    out = (plus - minus) / (2.0 * h);
}
void Model::d2psi_dtdq(double t, const Vec& q, int i, Vec& out) const {
    if (traits().psi_zero) {
        out.setZero(dim());
        return;
    }
    const double h = fd_step(t);
    Vec plus(dim()), minus(dim());
    dpsi_dq(t + h, q, i, plus);
    dpsi_dq(t - h, q, i, minus);
    out = (plus - minus) / (2.0 * h);
}
void Model::d3psi_dtdqdq(double t, const Vec& q, int i, int j, Vec& out) const {
    if (traits().psi_zero) {
        out.setZero(dim());
        return;
    }
    const double h = fd_step(t);
    Vec plus(dim()), minus(dim());
    d2psi_dqdq(t + h, q, i, j, plus);
    d2psi_dqdq(t - h, q, i, j, minus);
    out = (plus - minus) / (2.0 * h);
}

double Model::V(double, const Vec&) const { return 0.0; }

void Model::gradV(double t, const Vec& q, Vec& out) const {
    const double h = fd_step(q.norm());
    out.resize(dim());
    Vec qp = q, qm = q;
    for (int i = 0; i < dim(); ++i) {
        qp(i) = q(i) + h;
        qm(i) = q(i) - h;
        out(i) = (V(t, qp) - V(t, qm)) / (2.0 * h);
        qp(i) = q(i);
        qm(i) = q(i);
    }
}

void Model::F_ext(double, const Vec&, Vec& out) const { out.setZero(dim()); }

void Model::dsigma_dq(double t, const Vec& q, int i, Mat& out) const {
    const double h = fd_step(q.norm());
    Vec qp = q, qm = q;
    qp(i) += h;
    qm(i) -= h;
    Mat plus(dim(), noise_dim()), minus(dim(), noise_dim());
    sigma(t, qp, plus);
    sigma(t, qm, minus);
    out = (plus - minus) / (2.0 * h);
}

void Model::scalar_coeffs(double t, double q, ScalarCoeffs& out) const {
    if (!traits().scalar)
        throw WrongSpecializationError("scalar_coeffs: model is not scalar");
    Vec qv(1);
    qv(0) = q;
    Mat m(1, 1);
    gamma(t, qv, m);
    out.gamma = m(0, 0);
    dgamma_dq(t, qv, 0, m);
    out.dgamma_dq = m(0, 0);
    d2gamma_dqdq(t, qv, 0, 0, m);
    out.d2gamma_dq2 = m(0, 0);
    dgamma_dt(t, qv, m);
    out.dgamma_dt = m(0, 0);
    d2gamma_dtdq(t, qv, 0, m);
    out.d2gamma_dtdq = m(0, 0);
    Mat s(1, noise_dim());
    sigma(t, qv, s);
    out.sigma = s(0, 0);
    dsigma_dq(t, qv, 0, s);
    out.dsigma_dq = s(0, 0);
    Vec f(1);
    gradV(t, qv, f);
    out.force = -f(0);
    F_ext(t, qv, f);
    out.force += f(0);
}

// ---------------------------------------------------------------------------
// Effective-drag bundle
// ---------------------------------------------------------------------------

namespace {

bool provenance_complete(const DerivativeProvenance& p, bool psi_zero, int order) {
    bool ok = true;
    if (order >= 1) ok = ok && p.dgamma_dq && p.dgamma_dt;
    if (order >= 2) ok = ok && p.d2gamma_dqdq && p.d2gamma_dtdq;
    if (!psi_zero) {
        if (order >= 1) ok = ok && p.dpsi_dq && p.d2psi_dqdq && p.d2psi_dtdq;
        if (order >= 2) ok = ok && p.d3psi_dqdqdq && p.d3psi_dtdqdq;
    }
    return ok;
}

}  // namespace

DerivativeBundle eval_tilde_gamma(const Model& model, double t, const Vec& q,
                                  int order) {
    const int n = model.dim();
    const bool psi_zero = model.traits().psi_zero;
    DerivativeBundle b;
    b.n = n;
    b.order = order;
    b.analytic = provenance_complete(model.derivative_provenance(), psi_zero, order);

    Mat g(n, n);
    model.gamma(t, q, g);
    b.tg = g;
    Vec pa(n), pb(n);
    if (!psi_zero) {
        // antisymmetric part A_ik = d_k psi_i - d_i psi_k
        std::vector<Vec> dpsi(n, Vec(n));
        for (int i = 0; i < n; ++i) model.dpsi_dq(t, q, i, dpsi[i]);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) b.tg(i, k) += dpsi[k](i) - dpsi[i](k);
    }
    if (!b.tg.allFinite())
        throw EvaluationError("eval_tilde_gamma: non-finite drag at t=" + std::to_string(t));
    if (min_sym_eigenvalue(b.tg) < 0.5 * model.spectral_floor())
        throw DegenerateDragError("eval_tilde_gamma: symmetric part below spectral floor/2");

    Eigen::PartialPivLU<Mat> lu(b.tg);
    b.tg_inv = lu.inverse();

    if (order < 1) return b;

    b.dtg_dq.assign(n, Mat(n, n));
    for (int i = 0; i < n; ++i) model.dgamma_dq(t, q, i, b.dtg_dq[i]);
    b.dtg_dt.resize(n, n);
    model.dgamma_dt(t, q, b.dtg_dt);
    if (!psi_zero) {
        std::vector<std::vector<Vec>> d2psi(n, std::vector<Vec>(n, Vec(n)));
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                model.d2psi_dqdq(t, q, i, j, d2psi[i][j]);
                if (j != i) d2psi[j][i] = d2psi[i][j];
            }
        for (int c = 0; c < n; ++c)
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k)
                    b.dtg_dq[c](i, k) += d2psi[c][k](i) - d2psi[c][i](k);
        std::vector<Vec> dtp(n, Vec(n));
        for (int i = 0; i < n; ++i) model.d2psi_dtdq(t, q, i, dtp[i]);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) b.dtg_dt(i, k) += dtp[k](i) - dtp[i](k);
    }

    b.dtginv_dq.resize(n);
    for (int i = 0; i < n; ++i)
        b.dtginv_dq[i] = inv_derivative_cached(b.tg_inv, b.dtg_dq[i]);
    b.dtginv_dt = inv_derivative_cached(b.tg_inv, b.dtg_dt);

    if (order < 2) return b;

    const int ns = n * (n + 1) / 2;
    b.d2tg_dqdq.assign(ns, Mat(n, n));
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            model.d2gamma_dqdq(t, q, i, j, b.d2tg_dqdq[b.sym_index(i, j)]);
    b.d2tg_dtdq.assign(n, Mat(n, n));
    for (int i = 0; i < n; ++i) model.d2gamma_dtdq(t, q, i, b.d2tg_dtdq[i]);
    if (!psi_zero) {
        Vec v3(n);
        for (int c = 0; c < n; ++c)
            for (int j = c; j < n; ++j) {
                Mat& dst = b.d2tg_dqdq[b.sym_index(c, j)];
                for (int k = 0; k < n; ++k) {
                    model.d3psi_dqdqdq(t, q, c, j, k, v3);
                    for (int i = 0; i < n; ++i) dst(i, k) += v3(i);
                }
                for (int i = 0; i < n; ++i) {
                    model.d3psi_dqdqdq(t, q, c, j, i, v3);
                    for (int k = 0; k < n; ++k) dst(i, k) -= v3(k);
                }
            }
        for (int c = 0; c < n; ++c) {
            Mat& dst = b.d2tg_dtdq[c];
            for (int k = 0; k < n; ++k) {
                model.d3psi_dtdqdq(t, q, c, k, v3);
                for (int i = 0; i < n; ++i) dst(i, k) += v3(i);
            }
            for (int i = 0; i < n; ++i) {
                model.d3psi_dtdqdq(t, q, c, i, v3);
                for (int k = 0; k < n; ++k) dst(i, k) -= v3(k);
            }
        }
    }

    // Second partials of the inverse from the first-order construction rule.
    auto second_inv = [&](const Mat& dA_j, const Mat& d2A, const Mat& dInv_c) {
        return Mat(-(dInv_c * dA_j * b.tg_inv + b.tg_inv * d2A * b.tg_inv +
                     b.tg_inv * dA_j * dInv_c));
    };
    b.d2tginv_dqdq.resize(ns);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            b.d2tginv_dqdq[b.sym_index(i, j)] = second_inv(
                b.dtg_dq[j], b.d2tg_dqdq[b.sym_index(i, j)], b.dtginv_dq[i]);
    b.d2tginv_dtdq.resize(n);
    for (int j = 0; j < n; ++j)
        b.d2tginv_dtdq[j] = second_inv(b.dtg_dq[j], b.d2tg_dtdq[j], b.dtginv_dt);
    return b;
}

Vec total_force(const Model& model, double t, const Vec& q) {
    const int n = model.dim();
    Vec f(n), tmp(n);
    model.gradV(t, q, f);
    f = -f;
    if (!model.traits().psi_zero) {
        model.dpsi_dt(t, q, tmp);
        f -= tmp;
    }
    model.F_ext(t, q, tmp);
    f += tmp;
    if (!f.allFinite()) throw EvaluationError("total_force: non-finite value");
    return f;
}

Mat sigma_matrix(const Model& model, double t, const Vec& q) {
    Mat s(model.dim(), model.noise_dim());
    model.sigma(t, q, s);
    if (!s.allFinite()) throw EvaluationError("sigma: non-finite value");
    return s;
}

Mat noise_covariance(const Model& model, double t, const Vec& q) {
    Mat s = sigma_matrix(model, t, q);
    return s * s.transpose();
}

Vec noise_induced_drift(const DerivativeBundle& bundle, const Mat& Sigma) {
    const int n = bundle.n;
    Mat J = solve_lyapunov(bundle.tg, Sigma);
    Vec S(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += bundle.dtginv_dq[k].row(i).dot(J.col(k));
        S(i) = acc;
    }
    return S;
}

Vec noise_induced_drift(const Model& model, double t, const Vec& q,
                        bool fluctuation_dissipation_shortcut) {
    DerivativeBundle b = eval_tilde_gamma(model, t, q, 1);
    if (!fluctuation_dissipation_shortcut)
        return noise_induced_drift(b, noise_covariance(model, t, q));

    if (!model.traits().psi_zero)
        throw WrongSpecializationError(
            "noise_induced_drift: fluctuation-dissipation shortcut needs psi == 0");
    const int n = model.dim();
    Mat Sigma = noise_covariance(model, t, q);
    // Sigma = 2 kBT gamma for a scalar temperature field.
    double kBT = (Sigma * b.tg_inv).trace() / (2.0 * n);
    if ((Sigma - 2.0 * kBT * b.tg).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, Sigma.cwiseAbs().maxCoeff()))
        throw WrongSpecializationError(
            "noise_induced_drift: Sigma is not proportional to gamma");
    Vec S(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += b.dtginv_dq[j](i, j);
        S(i) = kBT * acc;
    }
    return S;
}

QGTensor qg_tensor(const DerivativeBundle& b) {
    const int n = b.n;
    if (b.order < 2) throw Error("qg_tensor: bundle must carry second derivatives");
    QGTensor out;
    out.n = n;
    out.analytic = b.analytic;

    LyapunovOperator op(b.tg.transpose());

    // Q^i as a matrix in (k, l): derivative direction is the second index.
    auto Q_of = [&](int i) {
        Mat Q(n, n);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) Q(k, l) = b.dtginv_dq[l](i, k);
        return Q;
    };

    out.T.resize(n);
    for (int i = 0; i < n; ++i) out.T[i] = op.solve(Q_of(i));

    out.dT_dt.resize(n);
    for (int i = 0; i < n; ++i) {
        Mat dQ(n, n);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) dQ(k, l) = b.d2tginv_dtdq[l](i, k);
        Mat rhs = dQ - b.dtg_dt.transpose() * out.T[i] - out.T[i] * b.dtg_dt;
        out.dT_dt[i] = op.solve(rhs);
    }

    out.dT_dq.assign(n, std::vector<Mat>(n));
    for (int c = 0; c < n; ++c)
        for (int i = 0; i < n; ++i) {
            Mat dQ(n, n);
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    dQ(k, l) = b.d2tginv_dqdq[b.sym_index(c, l)](i, k);
            Mat rhs = dQ - b.dtg_dq[c].transpose() * out.T[i] - out.T[i] * b.dtg_dq[c];
            out.dT_dq[c][i] = op.solve(rhs);
        }
    return out;
}

QGTensor qg_tensor(const Model& model, double t, const Vec& q) {
    return qg_tensor(eval_tilde_gamma(model, t, q, 2));
}

}  // namespace smallmass
