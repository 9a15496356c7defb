#include "smallmass/dynamics.hpp"

#include <cmath>

namespace smallmass {

namespace {

bool guard_tripped(const double* q, int n, double guard) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += q[i] * q[i];
    return !(s <= guard * guard);  // also catches NaN
}

void mark_and_fill(Trajectory& traj, std::int64_t bad, const double* last) {
    traj.exploded = true;
    traj.first_bad_step = bad;
    for (std::int64_t i = bad; i <= traj.steps; ++i) {
        double* dst = traj.row(traj.q, i);
        for (int c = 0; c < traj.n; ++c) dst[c] = last[c];
    }
}

}  // namespace

PhaseState step_underdamped(const Model& model, double m, const PhaseState& s,
                            const double* dW, double dt, UnderdampedScheme scheme) {
    const int n = model.dim();
    const int k = model.noise_dim();
    PhaseState out;
    out.t = s.t + dt;

    Vec F = total_force(model, s.t, s.q);
    Mat sig = sigma_matrix(model, s.t, s.q);
    Vec noise = sig * Eigen::Map<const Vec>(dW, k);

    if (scheme == UnderdampedScheme::EulerMaruyama) {
        DerivativeBundle b = eval_tilde_gamma(model, s.t, s.q, 0);
        out.q = s.q + (dt / m) * s.u;
        out.u = s.u + dt * (F - b.tg * s.u / m) + noise;
        return out;
    }

    DerivativeBundle b = eval_tilde_gamma(model, s.t, s.q, 0);
    Mat E = mat_exp(b.tg, -dt / m);
    Mat Eh = mat_exp(b.tg, -0.5 * dt / m);
    Mat I = Mat::Identity(n, n);
    Vec ginvF = b.tg_inv * F;
    out.u = E * s.u + m * ((I - E) * ginvF) + Eh * noise;
    out.q = s.q + b.tg_inv * ((I - E) * s.u) +
            b.tg_inv * (dt * F - m * ((I - E) * ginvF)) +
            b.tg_inv * ((I - Eh) * noise);
    return out;
}

namespace {

Trajectory simulate_underdamped_scalar(const Model& model, double m,
                                       const WienerGrid& path, double q0, double u0,
                                       UnderdampedScheme scheme, double guard) {
    Trajectory traj;
    traj.init(path.dt(), path.steps(), 1, /*with_u=*/true);
    const double dt = path.dt();
    double q = q0, u = u0;
    traj.q[0] = q;
    traj.u[0] = u;
    ScalarCoeffs c;
    for (std::int64_t i = 0; i < path.steps(); ++i) {
        const double t = traj.time_at(i);
        const double dW = path.increment(i, 0);
        model.scalar_coeffs(t, q, c);
        if (scheme == UnderdampedScheme::Exponential) {
            const double E = std::exp(-c.gamma * dt / m);
            const double Eh = std::exp(-0.5 * c.gamma * dt / m);
            const double ginvF = c.force / c.gamma;
            const double noise = c.sigma * dW;
            const double qn = q + (1.0 - E) * u / c.gamma +
                              (dt * c.force - m * (1.0 - E) * ginvF) / c.gamma +
                              (1.0 - Eh) * noise / c.gamma;
            u = E * u + m * (1.0 - E) * ginvF + Eh * noise;
            q = qn;
        } else {
            const double qn = q + dt * u / m;
            u += dt * (c.force - c.gamma * u / m) + c.sigma * dW;
            q = qn;
        }
        traj.q[i + 1] = q;
        traj.u[i + 1] = u;
        if (guard_tripped(&q, 1, guard) || !std::isfinite(u)) {
            mark_and_fill(traj, i + 1, &traj.q[i]);
            break;
        }
    }
    return traj;
}

Trajectory simulate_homogenized_scalar(const Model& model, const WienerGrid& path,
                                       double q0, PositionScheme scheme, double guard) {
    Trajectory traj;
    traj.init(path.dt(), path.steps(), 1);
    const double dt = path.dt();
    double q = q0;
    traj.q[0] = q;
    ScalarCoeffs c;
    for (std::int64_t i = 0; i < path.steps(); ++i) {
        const double t = traj.time_at(i);
        const double dW = path.increment(i, 0);
        model.scalar_coeffs(t, q, c);
        const double ginv = 1.0 / c.gamma;
        const double S = -0.5 * c.sigma * c.sigma * c.dgamma_dq * ginv * ginv * ginv;
        q += (c.force * ginv + S) * dt + c.sigma * ginv * dW;
        if (scheme == PositionScheme::Milstein) {
            const double diff = c.sigma * ginv;
            const double ddiff = c.dsigma_dq * ginv - c.sigma * c.dgamma_dq * ginv * ginv;
            q += 0.5 * diff * ddiff * (dW * dW - dt);
        }
        traj.q[i + 1] = q;
        if (guard_tripped(&q, 1, guard)) {
            mark_and_fill(traj, i + 1, &traj.q[i]);
            break;
        }
    }
    return traj;
}

}  // namespace

Trajectory simulate_underdamped(const Model& model, double m, const WienerGrid& path,
                                const Vec& q0, const Vec& u0,
                                UnderdampedScheme scheme, double guard,
                                bool allow_fast_path) {
    const int n = model.dim();
    if (path.noise_dim() != model.noise_dim())
        throw GridMismatchError("simulate_underdamped: noise dimension mismatch");
    if (allow_fast_path && model.traits().scalar)
        return simulate_underdamped_scalar(model, m, path, q0(0), u0(0), scheme, guard);

    Trajectory traj;
    traj.init(path.dt(), path.steps(), n, /*with_u=*/true);
    PhaseState s{0.0, q0, u0};
    for (int c = 0; c < n; ++c) {
        traj.q[c] = q0(c);
        traj.u[c] = u0(c);
    }
    for (std::int64_t i = 0; i < path.steps(); ++i) {
        s = step_underdamped(model, m, s, path.increment_row(i), path.dt(), scheme);
        double* qd = traj.row(traj.q, i + 1);
        double* ud = traj.row(traj.u, i + 1);
        for (int c = 0; c < n; ++c) {
            qd[c] = s.q(c);
            ud[c] = s.u(c);
        }
        if (guard_tripped(qd, n, guard) || !s.u.allFinite()) {
            mark_and_fill(traj, i + 1, traj.row(traj.q, i));
            break;
        }
    }
    return traj;
}

Trajectory simulate_homogenized(const Model& model, const WienerGrid& path,
                                const Vec& q0, PositionScheme scheme, double guard,
                                bool allow_fast_path, bool fluct_diss_drift) {
    const int n = model.dim();
    const int k = model.noise_dim();
    if (path.noise_dim() != k)
        throw GridMismatchError("simulate_homogenized: noise dimension mismatch");
    if (scheme == PositionScheme::Milstein && n != 1)
        throw Error("simulate_homogenized: Milstein option requires n == 1");
    if (allow_fast_path && model.traits().scalar)
        return simulate_homogenized_scalar(model, path, q0(0), scheme, guard);

    Trajectory traj;
    traj.init(path.dt(), path.steps(), n);
    Vec q = q0;
    for (int c = 0; c < n; ++c) traj.q[c] = q(c);
    const double dt = path.dt();
    for (std::int64_t i = 0; i < path.steps(); ++i) {
        const double t = traj.time_at(i);
        DerivativeBundle b = eval_tilde_gamma(model, t, q, 1);
        Mat sig = sigma_matrix(model, t, q);
        Vec S = fluct_diss_drift ? noise_induced_drift(model, t, q, true)
                                 : noise_induced_drift(b, Mat(sig * sig.transpose()));
        Vec F = total_force(model, t, q);
        Vec dW = Eigen::Map<const Vec>(path.increment_row(i), k);
        double milstein = 0.0;
        if (scheme == PositionScheme::Milstein) {
            Mat dsig(n, k);
            model.dsigma_dq(t, q, 0, dsig);
            double diff = (b.tg_inv * sig)(0, 0);
            double ddiff = (b.dtginv_dq[0] * sig + b.tg_inv * dsig)(0, 0);
            milstein = 0.5 * diff * ddiff * (dW(0) * dW(0) - dt);
        }
        q += (b.tg_inv * F + S) * dt + b.tg_inv * (sig * dW);
        if (scheme == PositionScheme::Milstein) q(0) += milstein;
        double* qd = traj.row(traj.q, i + 1);
        for (int c = 0; c < n; ++c) qd[c] = q(c);
        if (guard_tripped(qd, n, guard)) {
            mark_and_fill(traj, i + 1, traj.row(traj.q, i));
            break;
        }
    }
    return traj;
}

double propagator_decay_excess(const Model& model, double m, const Trajectory& ref) {
    const double dt = ref.dt;
    const double lambda = model.spectral_floor();
    const int n = ref.n;
    Mat P = Mat::Identity(n, n);
    double excess = -1.0;
    const double step_bound = std::exp(-lambda * dt / m);
    for (std::int64_t i = 0; i < ref.steps; ++i) {
        DerivativeBundle b = eval_tilde_gamma(model, ref.time_at(i), ref.q_at(i), 0);
        Mat E = mat_exp(b.tg, -dt / m);
        excess = std::max(excess, operator_norm(E) - step_bound);
        P = E * P;
        double bound = std::exp(-lambda * ref.time_at(i + 1) / m);
        excess = std::max(excess, operator_norm(P) - bound);
        if (bound < 1e-280) break;  // product fully decayed; avoid underflow
    }
    return excess;
}

}  // namespace smallmass
