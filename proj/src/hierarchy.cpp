#include "smallmass/hierarchy.hpp"

#include <cmath>
#include <string>

namespace smallmass {

namespace {

// Everything the remainder terms need at one driving-trajectory site.
struct SitePieces {
    DerivativeBundle b;
    QGTensor T;
    Vec F;
    Mat sig;
};

SitePieces eval_site(const Model& model, double t, const Vec& y) {
    SitePieces s;
    s.b = eval_tilde_gamma(model, t, y, 2);
    s.T = qg_tensor(s.b);
    s.F = total_force(model, t, y);
    s.sig = sigma_matrix(model, t, y);
    return s;
}

Vec z_step_generic(const SitePieces& s, double m, const Vec& z, const Vec& dW,
                   double dt) {
    const int n = s.b.n;
    Mat E = mat_exp(s.b.tg, -dt / m);
    Mat Eh = mat_exp(s.b.tg, -0.5 * dt / m);
    const double sqm = std::sqrt(m);
    Vec out = E * z + (Mat::Identity(n, n) - E) * (sqm * (s.b.tg_inv * s.F)) +
              (1.0 / sqm) * (Eh * (s.sig * dW));
    return out;
}

// dR over one step; `sdW` is sigma(t, y_t) dW, `A`/`B` are the cached
// endpoint quantities tg_inv z and sqrt(m) T:zz at the left endpoint,
// `A_next`/`B_next` the same at the right endpoint.
Vec remainder_from(const SitePieces& L, double m, const Vec& z, const Vec& sdW,
                   double dt, const Vec& A, const Vec& B, const Vec& A_next,
                   const Vec& B_next) {
    const int n = L.b.n;
    const double sqm = std::sqrt(m);
    Vec dR(n);
    for (int i = 0; i < n; ++i) {
        const Mat& Ti = L.T.T[i];
        double acc = -(A_next(i) - A(i));
        acc += L.b.dtginv_dt.row(i).dot(z) * dt;
        acc += (z.dot(Ti * L.F) + L.F.dot(Ti * z)) * dt;
        double third = 0.0;
        for (int c = 0; c < n; ++c) third += z(c) * z.dot(L.T.dT_dq[c][i] * z);
        acc += third * dt;
        acc += z.dot(Ti * sdW) + sdW.dot(Ti * z);
        acc -= B_next(i) - B(i);
        acc += sqm * z.dot(L.T.dT_dt[i] * z) * dt;
        dR(i) = acc;
    }
    return dR;
}

Vec endpoint_A(const DerivativeBundle& b, const Vec& z) { return b.tg_inv * z; }

Vec endpoint_B(const QGTensor& T, double m, const Vec& z) {
    const int n = T.n;
    Vec B(n);
    const double sqm = std::sqrt(m);
    for (int i = 0; i < n; ++i) B(i) = sqm * z.dot(T.T[i] * z);
    return B;
}

void check_finite_z(const Vec& z, const WienerGrid& path, std::int64_t step) {
    if (!z.allFinite())
        throw FastProcessDivergence("fast process diverged at step " +
                                    std::to_string(step) + " on path " +
                                    std::to_string(path.path_id()));
}

HierarchyRun sentinel_run(const Model& model, double m, int level,
                          const WienerGrid& path, const Vec& q0) {
    HierarchyRun run;
    run.mass = m;
    run.level = level;
    run.sentinel = true;
    run.traj.init(path.dt(), path.steps(), model.dim(), false, false, true);
    run.traj.exploded = true;
    run.traj.first_bad_step = 0;
    for (std::int64_t i = 0; i <= path.steps(); ++i) {
        double* row = run.traj.row(run.traj.q, i);
        for (int c = 0; c < model.dim(); ++c) row[c] = q0(c);
    }
    return run;
}

// Generic matrix kernel for one level > 1.
HierarchyRun run_generic(const Model& model, double m, int level,
                         const WienerGrid& path, const Vec& q0,
                         const Trajectory& driving, const HierarchyOptions& opts,
                         bool fluct_diss_drift) {
    const int n = model.dim();
    const int k = model.noise_dim();
    const double dt = path.dt();
    const double sqm = std::sqrt(m);
    if (driving.steps != path.steps() || std::abs(driving.dt - dt) > 1e-12 * dt)
        throw GridMismatchError("run_level: driving trajectory grid mismatch");
    if (driving.exploded) return sentinel_run(model, m, level, path, q0);
    if (opts.scheme == PositionScheme::Milstein && n != 1)
        throw Error("run_level: Milstein option requires n == 1");

    HierarchyRun run;
    run.mass = m;
    run.level = level;
    run.traj.init(dt, path.steps(), n, false, true, true);

    Vec z = opts.z0.size() ? opts.z0 : Vec(Vec::Zero(n));
    Vec q = q0;
    Vec Raccum = Vec::Zero(n);
    for (int c = 0; c < n; ++c) {
        run.traj.q[c] = q(c);
        run.traj.z[c] = z(c);
    }

    SitePieces left = eval_site(model, 0.0, driving.q_at(0));
    Vec A = endpoint_A(left.b, z);
    Vec B = endpoint_B(left.T, m, z);
    run.max_z_norm = z.norm();

    for (std::int64_t i = 0; i < path.steps(); ++i) {
        const double t = run.traj.time_at(i);
        Vec dW = Eigen::Map<const Vec>(path.increment_row(i), k);
        Vec sdW = left.sig * dW;
        Vec z_next = z_step_generic(left, m, z, dW, dt);
        check_finite_z(z_next, path, i);

        SitePieces right = eval_site(model, t + dt, driving.q_at(i + 1));
        Vec A_next = endpoint_A(right.b, z_next);
        Vec B_next = endpoint_B(right.T, m, z_next);
        Vec dR = remainder_from(left, m, z, sdW, dt, A, B, A_next, B_next);

        // own-state drift/diffusion
        DerivativeBundle bq = eval_tilde_gamma(model, t, q, 1);
        Mat sigq = sigma_matrix(model, t, q);
        Vec S;
        if (fluct_diss_drift) {
            S = noise_induced_drift(model, t, q, true);
        } else {
            S = noise_induced_drift(bq, Mat(sigq * sigq.transpose()));
        }
        Vec Fq = total_force(model, t, q);
        double milstein = 0.0;
        if (opts.scheme == PositionScheme::Milstein) {
            Mat dsig(n, k);
            model.dsigma_dq(t, q, 0, dsig);
            double diff = (bq.tg_inv * sigq)(0, 0);
            double ddiff = (bq.dtginv_dq[0] * sigq + bq.tg_inv * dsig)(0, 0);
            milstein = 0.5 * diff * ddiff * (dW(0) * dW(0) - dt);
        }
        q += (bq.tg_inv * Fq + S) * dt + bq.tg_inv * (sigq * dW) + sqm * dR;
        if (opts.scheme == PositionScheme::Milstein) q(0) += milstein;

        Raccum += dR;
        z = z_next;
        A = std::move(A_next);
        B = std::move(B_next);
        left = std::move(right);
        run.max_z_norm = std::max(run.max_z_norm, z.norm());

        double* qd = run.traj.row(run.traj.q, i + 1);
        double* zd = run.traj.row(run.traj.z, i + 1);
        double* rd = run.traj.row(run.traj.R, i + 1);
        for (int c = 0; c < n; ++c) {
            qd[c] = q(c);
            zd[c] = z(c);
            rd[c] = Raccum(c);
        }
        if (!(q.norm() <= opts.guard)) {
            run.traj.exploded = true;
            run.traj.first_bad_step = i + 1;
            for (std::int64_t j = i + 1; j <= path.steps(); ++j) {
                double* row = run.traj.row(run.traj.q, j);
                for (int c = 0; c < n; ++c) row[c] = run.traj.q[(j - 1) * n + c];
            }
            run.sentinel = true;
            break;
        }
    }
    return run;
}

// Scalar kernel: gamma and sigma scalar-valued, psi == 0. The
// contraction tensor collapses to Y = -gamma'/(2 gamma^3).
struct ScalarSite {
    double gamma, ginv, Y, dY_dq, dY_dt, dginv_dt, sigma, force;
};

ScalarSite scalar_site(const Model& model, double t, double y, ScalarCoeffs& c) {
    model.scalar_coeffs(t, y, c);
    ScalarSite s;
    s.gamma = c.gamma;
    const double g = c.gamma;
    const double g2 = g * g, g3 = g2 * g, g4 = g2 * g2;
    s.ginv = 1.0 / g;
    s.Y = -0.5 * c.dgamma_dq / g3;
    s.dY_dq = -0.5 * c.d2gamma_dq2 / g3 + 1.5 * c.dgamma_dq * c.dgamma_dq / g4;
    s.dY_dt = -0.5 * c.d2gamma_dtdq / g3 + 1.5 * c.dgamma_dq * c.dgamma_dt / g4;
    s.dginv_dt = -c.dgamma_dt / g2;
    s.sigma = c.sigma;
    s.force = c.force;
    return s;
}

HierarchyRun run_scalar(const Model& model, double m, int level,
                        const WienerGrid& path, const Vec& q0,
                        const Trajectory& driving, const HierarchyOptions& opts) {
    if (!model.traits().scalar)
        throw WrongSpecializationError("run_level_special: model is not scalar");
    const double dt = path.dt();
    const double sqm = std::sqrt(m);
    if (driving.steps != path.steps() || std::abs(driving.dt - dt) > 1e-12 * dt)
        throw GridMismatchError("run_level: driving trajectory grid mismatch");
    if (driving.exploded) return sentinel_run(model, m, level, path, q0);

    HierarchyRun run;
    run.mass = m;
    run.level = level;
    run.traj.init(dt, path.steps(), 1, false, true, true);

    double z = opts.z0.size() ? opts.z0(0) : 0.0;
    double q = q0(0);
    double Raccum = 0.0;
    run.traj.q[0] = q;
    run.traj.z[0] = z;
    run.max_z_norm = std::abs(z);

    ScalarCoeffs cy, cq;
    ScalarSite left = scalar_site(model, 0.0, driving.q[0], cy);
    double A = left.ginv * z;
    double B = sqm * left.Y * z * z;
    const bool milstein = opts.scheme == PositionScheme::Milstein;

    for (std::int64_t i = 0; i < path.steps(); ++i) {
        const double t = run.traj.time_at(i);
        const double dW = path.increment(i, 0);

        const double E = std::exp(-left.gamma * dt / m);
        const double Eh = std::exp(-0.5 * left.gamma * dt / m);
        const double z_next =
            E * z + (1.0 - E) * sqm * left.force * left.ginv + Eh * left.sigma * dW / sqm;
        if (!std::isfinite(z_next))
            throw FastProcessDivergence("fast process diverged at step " +
                                        std::to_string(i) + " on path " +
                                        std::to_string(path.path_id()));

        ScalarSite right = scalar_site(model, t + dt, driving.q[i + 1], cy);
        const double A_next = right.ginv * z_next;
        const double B_next = sqm * right.Y * z_next * z_next;
        const double sdW = left.sigma * dW;
        const double dR = -(A_next - A) + left.dginv_dt * z * dt +
                          2.0 * left.Y * z * left.force * dt +
                          z * z * z * left.dY_dq * dt + 2.0 * left.Y * z * sdW -
                          (B_next - B) + sqm * z * z * left.dY_dt * dt;

        model.scalar_coeffs(t, q, cq);
        const double ginv = 1.0 / cq.gamma;
        const double S = -0.5 * cq.sigma * cq.sigma * cq.dgamma_dq * ginv * ginv * ginv;
        double dq = (cq.force * ginv + S) * dt + cq.sigma * ginv * dW + sqm * dR;
        if (milstein) {
            const double diff = cq.sigma * ginv;
            const double ddiff = cq.dsigma_dq * ginv - cq.sigma * cq.dgamma_dq * ginv * ginv;
            dq += 0.5 * diff * ddiff * (dW * dW - dt);
        }
        q += dq;

        Raccum += dR;
        z = z_next;
        A = A_next;
        B = B_next;
        left = right;
        run.max_z_norm = std::max(run.max_z_norm, std::abs(z));

        run.traj.q[i + 1] = q;
        run.traj.z[i + 1] = z;
        run.traj.R[i + 1] = Raccum;
        if (!(std::abs(q) <= opts.guard)) {
            run.traj.exploded = true;
            run.traj.first_bad_step = i + 1;
            for (std::int64_t j = i + 1; j <= path.steps(); ++j) run.traj.q[j] = run.traj.q[i];
            run.sentinel = true;
            break;
        }
    }
    return run;
}

// State-independent drag (psi == 0): the remainder reduces to
// dR = d_t(gamma^{-1}) z dt - d(gamma^{-1} z), and the drift correction
// vanishes.
HierarchyRun run_const_gamma(const Model& model, double m, int level,
                             const WienerGrid& path, const Vec& q0,
                             const Trajectory& driving, const HierarchyOptions& opts) {
    const ModelTraits traits = model.traits();
    if (!traits.gamma_state_independent || !traits.psi_zero)
        throw WrongSpecializationError(
            "run_level_special: model drag is not state-independent (or psi != 0)");
    const int n = model.dim();
    const int k = model.noise_dim();
    const double dt = path.dt();
    const double sqm = std::sqrt(m);
    if (driving.steps != path.steps() || std::abs(driving.dt - dt) > 1e-12 * dt)
        throw GridMismatchError("run_level: driving trajectory grid mismatch");
    if (driving.exploded) return sentinel_run(model, m, level, path, q0);
    if (opts.scheme == PositionScheme::Milstein && n != 1)
        throw Error("run_level: Milstein option requires n == 1");

    HierarchyRun run;
    run.mass = m;
    run.level = level;
    run.traj.init(dt, path.steps(), n, false, true, true);

    Vec z = opts.z0.size() ? opts.z0 : Vec(Vec::Zero(n));
    Vec q = q0;
    Vec Raccum = Vec::Zero(n);
    for (int c = 0; c < n; ++c) {
        run.traj.q[c] = q(c);
        run.traj.z[c] = z(c);
    }
    run.max_z_norm = z.norm();

    const bool frozen = traits.time_independent;
    Mat g(n, n), gt(n, n);
    Vec zero_q = Vec::Zero(n);
    model.gamma(0.0, zero_q, g);
    Eigen::PartialPivLU<Mat> lu(g);
    Mat ginv = lu.inverse();
    Mat E = mat_exp(g, -dt / m);
    Mat Eh = mat_exp(g, -0.5 * dt / m);
    Mat dginv_dt = Mat::Zero(n, n);
    if (!frozen) {
        model.dgamma_dt(0.0, zero_q, gt);
        dginv_dt = -ginv * gt * ginv;
    }

    Vec A = ginv * z;
    for (std::int64_t i = 0; i < path.steps(); ++i) {
        const double t = run.traj.time_at(i);
        if (!frozen && i > 0) {
            model.gamma(t, zero_q, g);
            lu.compute(g);
            ginv = lu.inverse();
            E = mat_exp(g, -dt / m);
            Eh = mat_exp(g, -0.5 * dt / m);
            model.dgamma_dt(t, zero_q, gt);
            dginv_dt = -ginv * gt * ginv;
            A = ginv * z;  // left endpoint uses gamma(t_i)
        }
        Vec dW = Eigen::Map<const Vec>(path.increment_row(i), k);
        Vec y = driving.q_at(i);
        Vec Fy = total_force(model, t, y);
        Mat sigy = sigma_matrix(model, t, y);
        Vec z_next = E * z + (Mat::Identity(n, n) - E) * (sqm * (ginv * Fy)) +
                     (1.0 / sqm) * (Eh * (sigy * dW));
        check_finite_z(z_next, path, i);

        Mat ginv_next = ginv;
        if (!frozen) {
            Mat gn(n, n);
            model.gamma(t + dt, zero_q, gn);
            ginv_next = gn.partialPivLu().inverse();
        }
        Vec A_next = ginv_next * z_next;
        Vec dR = dginv_dt * z * dt - (A_next - A);

        Vec Fq = total_force(model, t, q);
        Mat sigq = sigma_matrix(model, t, q);
        double milstein = 0.0;
        if (opts.scheme == PositionScheme::Milstein) {
            Mat dsig(n, k);
            model.dsigma_dq(t, q, 0, dsig);
            double diff = (ginv * sigq)(0, 0);
            double ddiff = (ginv * dsig)(0, 0);
            milstein = 0.5 * diff * ddiff * (dW(0) * dW(0) - dt);
        }
        q += (ginv * Fq) * dt + ginv * (sigq * dW) + sqm * dR;
        if (opts.scheme == PositionScheme::Milstein) q(0) += milstein;

        Raccum += dR;
        z = z_next;
        A = std::move(A_next);
        run.max_z_norm = std::max(run.max_z_norm, z.norm());

        double* qd = run.traj.row(run.traj.q, i + 1);
        double* zd = run.traj.row(run.traj.z, i + 1);
        double* rd = run.traj.row(run.traj.R, i + 1);
        for (int c = 0; c < n; ++c) {
            qd[c] = q(c);
            zd[c] = z(c);
            rd[c] = Raccum(c);
        }
        if (!(q.norm() <= opts.guard)) {
            run.traj.exploded = true;
            run.traj.first_bad_step = i + 1;
            for (std::int64_t j = i + 1; j <= path.steps(); ++j) {
                double* row = run.traj.row(run.traj.q, j);
                for (int c = 0; c < n; ++c) row[c] = run.traj.q[(j - 1) * n + c];
            }
            run.sentinel = true;
            break;
        }
    }
    return run;
}

HierarchyRun level_one(const Model& model, double m, const WienerGrid& path,
                       const Vec& q0, const HierarchyOptions& opts,
                       bool fluct_diss_drift) {
    HierarchyRun run;
    run.mass = m;
    run.level = 1;
    run.traj = simulate_homogenized(model, path, q0, opts.scheme, opts.guard,
                                    opts.fast_path != FastPath::Off, fluct_diss_drift);
    // level 1 carries an identically-zero remainder path
    run.traj.R.assign(run.traj.q.size(), 0.0);
    run.sentinel = run.traj.exploded;
    return run;
}

}  // namespace

Vec step_z(const Model& model, double m, const Vec& z, const Vec& y_t, double t,
           const double* dW, double dt) {
    SitePieces s;
    s.b = eval_tilde_gamma(model, t, y_t, 0);
    s.F = total_force(model, t, y_t);
    s.sig = sigma_matrix(model, t, y_t);
    Vec dWv = Eigen::Map<const Vec>(dW, model.noise_dim());
    Vec out = z_step_generic(s, m, z, dWv, dt);
    if (!out.allFinite())
        throw FastProcessDivergence("step_z: non-finite fast process");
    return out;
}

Vec remainder_increment(const Model& model, double m, double t, const Vec& y_t,
                        const Vec& y_next, const Vec& z_t, const Vec& z_next,
                        const double* dW, double dt) {
    SitePieces left = eval_site(model, t, y_t);
    DerivativeBundle rb = eval_tilde_gamma(model, t + dt, y_next, 2);
    QGTensor rT = qg_tensor(rb);
    Vec dWv = Eigen::Map<const Vec>(dW, model.noise_dim());
    Vec sdW = left.sig * dWv;
    Vec A = endpoint_A(left.b, z_t);
    Vec B = endpoint_B(left.T, m, z_t);
    Vec A_next = endpoint_A(rb, z_next);
    Vec B_next = endpoint_B(rT, m, z_next);
    return remainder_from(left, m, z_t, sdW, dt, A, B, A_next, B_next);
}

HierarchyRun run_level_from(const Model& model, double m, int level,
                            const WienerGrid& path, const Vec& q0,
                            const Trajectory& driving, const HierarchyOptions& opts) {
    if (level < 2) throw Error("run_level_from: level must be >= 2");
    const ModelTraits traits = model.traits();
    switch (opts.fast_path) {
        case FastPath::Off:
            return run_generic(model, m, level, path, q0, driving, opts, false);
        case FastPath::Scalar:
            return run_scalar(model, m, level, path, q0, driving, opts);
        case FastPath::ConstGamma:
            return run_const_gamma(model, m, level, path, q0, driving, opts);
        case FastPath::Auto:
        default:
            if (traits.scalar) return run_scalar(model, m, level, path, q0, driving, opts);
            if (traits.gamma_state_independent && traits.psi_zero)
                return run_const_gamma(model, m, level, path, q0, driving, opts);
            return run_generic(model, m, level, path, q0, driving, opts, false);
    }
}

HierarchyRun run_level(const Model& model, double m, int level,
                       const WienerGrid& path, const Vec& q0,
                       const HierarchyOptions& opts) {
    if (level < 1) throw Error("run_level: level must be >= 1");
    if (level == 1) return level_one(model, m, path, q0, opts, false);
    HierarchyRun prev = run_level(model, m, level - 1, path, q0, opts);
    if (prev.sentinel) {
        HierarchyRun out = sentinel_run(model, m, level, path, q0);
        return out;
    }
    return run_level_from(model, m, level, path, q0, prev.traj, opts);
}

std::vector<HierarchyRun> run_hierarchy(const Model& model, double m, int max_level,
                                        const WienerGrid& path, const Vec& q0,
                                        const HierarchyOptions& opts) {
    std::vector<HierarchyRun> runs;
    runs.reserve(max_level);
    runs.push_back(level_one(model, m, path, q0, opts, false));
    for (int level = 2; level <= max_level; ++level) {
        if (runs.back().sentinel) {
            runs.push_back(sentinel_run(model, m, level, path, q0));
            continue;
        }
        runs.push_back(run_level_from(model, m, level, path, q0, runs.back().traj, opts));
    }
    return runs;
}

HierarchyRun run_level_special(SpecialKind kind, const Model& model, double m,
                               int level, const WienerGrid& path, const Vec& q0,
                               const HierarchyOptions& opts) {
    const ModelTraits traits = model.traits();
    if (kind == SpecialKind::Scalar && !traits.scalar)
        throw WrongSpecializationError("run_level_special: scalar kind needs a scalar model");
    if (kind == SpecialKind::ConstGamma &&
        (!traits.gamma_state_independent || !traits.psi_zero))
        throw WrongSpecializationError(
            "run_level_special: const-gamma kind needs state-independent drag");
    if (kind == SpecialKind::FluctDiss && !traits.psi_zero)
        throw WrongSpecializationError("run_level_special: fluct-diss kind needs psi == 0");

    const bool fluct = kind == SpecialKind::FluctDiss;
    if (level == 1) return level_one(model, m, path, q0, opts, fluct);

    HierarchyRun prev = run_level_special(kind, model, m, level - 1, path, q0, opts);
    if (prev.sentinel) return sentinel_run(model, m, level, path, q0);
    switch (kind) {
        case SpecialKind::Scalar:
            return run_scalar(model, m, level, path, q0, prev.traj, opts);
        case SpecialKind::ConstGamma:
            return run_const_gamma(model, m, level, path, q0, prev.traj, opts);
        case SpecialKind::FluctDiss:
        default:
            return run_generic(model, m, level, path, q0, prev.traj, opts, true);
    }
}

}  // namespace smallmass
