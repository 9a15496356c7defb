#include "smallmass/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

namespace smallmass {

namespace {

// two-sided 95% t quantiles by degrees of freedom (1-based); beyond the
// table the normal quantile is close enough.
double t_quantile_975(int dof) {
    static const double table[] = {
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
        2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
        2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    if (dof < 1) return 12.706;
    if (dof <= 30) return table[dof - 1];
    return 1.96;
}

double norm_p(const double* a, const double* b, int n, double p) {
    double s = 0.0;
    for (int c = 0; c < n; ++c) {
        double d = a[c] - b[c];
        s += d * d;
    }
    return std::pow(s, 0.5 * p);
}

struct MeanVar {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
};

MeanVar mean_and_se(double sum, double sumsq, std::int64_t n) {
    MeanVar mv;
    if (n <= 0) return mv;
    mv.mean = sum / n;
    double var = sumsq / n - mv.mean * mv.mean;
    if (var < 0.0) var = 0.0;
    if (n > 1) var = var * n / (n - 1.0);
    mv.se = std::sqrt(var / n);
    return mv;
}

// delta method for err = mean^{1/p}
void finish_error(const MeanVar& mv, double p, double& err, double& se) {
    err = mv.mean > 0.0 ? std::pow(mv.mean, 1.0 / p) : 0.0;
    se = (mv.mean > 0.0) ? std::pow(mv.mean, 1.0 / p - 1.0) / p * mv.se : 0.0;
}

}  // namespace

ErrorEstimate strong_error(const std::vector<Trajectory>& reference,
                           const std::vector<Trajectory>& approx, double p) {
    if (reference.size() != approx.size() || reference.empty())
        throw Error("strong_error: ensembles must be non-empty and equal-sized");
    const Trajectory& first = reference.front();
    const std::int64_t steps = first.steps;
    const int n = first.n;

    ErrorEstimate out;
    std::vector<double> sumP(steps + 1, 0.0), sumP2(steps + 1, 0.0);
    double sumMax = 0.0, sumMax2 = 0.0;

    for (std::size_t path = 0; path < reference.size(); ++path) {
        const Trajectory& r = reference[path];
        const Trajectory& a = approx[path];
        if (r.steps != steps || a.steps != steps || r.n != n || a.n != n ||
            std::abs(r.dt - a.dt) > 1e-12 * first.dt ||
            std::abs(r.dt - first.dt) > 1e-12 * first.dt)
            throw GridMismatchError("strong_error: trajectory grids do not match");
        if (r.exploded || a.exploded) {
            ++out.sentinels;
            continue;
        }
        double maxv = 0.0;
        for (std::int64_t i = 0; i <= steps; ++i) {
            double v = norm_p(r.row(r.q, i), a.row(a.q, i), n, p);
            sumP[i] += v;
            sumP2[i] += v * v;
            if (v > maxv) maxv = v;
        }
        sumMax += maxv;
        sumMax2 += maxv * maxv;
        ++out.used_paths;
    }
    if (out.used_paths == 0) return out;

    std::int64_t argmax = 0;
    for (std::int64_t i = 1; i <= steps; ++i)
        if (sumP[i] > sumP[argmax]) argmax = i;
    out.argmax_time_index = argmax;
    finish_error(mean_and_se(sumP[argmax], sumP2[argmax], out.used_paths), p,
                 out.err_supE, out.stderr_supE);
    finish_error(mean_and_se(sumMax, sumMax2, out.used_paths), p, out.err_Esup,
                 out.stderr_Esup);
    return out;
}

SlopeFit fit_slope(const std::vector<double>& masses,
                   const std::vector<double>& errors) {
    if (masses.size() != errors.size())
        throw Error("fit_slope: input lengths differ");
    std::vector<double> x, y;
    SlopeFit fit;
    for (std::size_t i = 0; i < masses.size(); ++i) {
        if (!(masses[i] > 0.0)) throw Error("fit_slope: masses must be positive");
        if (errors[i] > 0.0) {
            x.push_back(std::log(masses[i]));
            y.push_back(std::log(errors[i]));
        } else {
            ++fit.points_dropped;
        }
    }
    const int N = static_cast<int>(x.size());
    if (N < 3)
        throw InsufficientDataError("fit_slope: need at least 3 positive points, have " +
                                    std::to_string(N));
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < N; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= N;
    my /= N;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < N; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (int i = 0; i < N; ++i) {
        double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ssr += r * r;
    }
    const int dof = N - 2;
    double se = dof > 0 ? std::sqrt(ssr / dof / sxx) : 0.0;
    fit.ci95 = t_quantile_975(dof) * se;
    fit.points_used = N;
    return fit;
}

// ---------------------------------------------------------------------------
// coupled mass-sweep engine
// ---------------------------------------------------------------------------

namespace {

struct MassPlan {
    double m = 0.0;
    std::int64_t steps = 0;
    std::int64_t factor = 0;       // coarsening factor from the base grid
    std::int64_t obs_stride = 0;   // fine steps per observation step
    bool control = false;
};

struct StudyPlan {
    std::vector<MassPlan> masses;
    std::int64_t base_steps = 0;
    double base_dt = 0.0;
    std::int64_t obs_steps = 0;
    int refine = 1;
};

StudyPlan make_plan(const StudyConfig& c) {
    if (!c.model) throw Error("study: no model");
    if (c.mass_count < 1 || c.paths < 1 || c.levels < 1)
        throw Error("study: mass_count, paths, levels must be >= 1");
    if (c.mass_ratio < 2) throw Error("study: mass ratio must be >= 2");
    StudyPlan plan;
    plan.refine = c.control == ControlMode::Off ? 1 : 2;
    const double steps0_exact = c.T / (c.hbar * c.m0);
    const std::int64_t steps0 = std::llround(steps0_exact);
    if (steps0 < 1 || std::abs(steps0_exact - steps0) > 1e-6 * steps0_exact)
        throw Error("study: T must be an integer multiple of hbar*m0");
    std::int64_t mult = 1;
    for (int j = 0; j < c.mass_count - 1; ++j) mult *= c.mass_ratio;
    plan.base_steps = steps0 * mult * plan.refine;
    plan.base_dt = c.T / static_cast<double>(plan.base_steps);
    plan.obs_steps = steps0;

    double m = c.m0;
    std::int64_t steps = steps0;
    std::int64_t factor = mult * plan.refine;
    for (int j = 0; j < c.mass_count; ++j) {
        MassPlan mp;
        mp.m = m;
        mp.steps = steps;
        mp.factor = factor;
        mp.obs_stride = steps / steps0;
        mp.control = c.control == ControlMode::Full ||
                     (c.control == ControlMode::MinMass && j == c.mass_count - 1);
        plan.masses.push_back(mp);
        m /= c.mass_ratio;
        steps *= c.mass_ratio;
        factor /= c.mass_ratio;
    }
    return plan;
}

// Per-(mass, level) accumulators on the observation grid plus the
// per-path sup statistics; reduced over fixed path blocks in index order so
// results do not depend on the thread count.
struct LevelAcc {
    std::vector<double> sumP, sumP2;
    double sumMax = 0.0, sumMax2 = 0.0;
    void init(std::int64_t obs) {
        sumP.assign(obs + 1, 0.0);
        sumP2.assign(obs + 1, 0.0);
    }
    void merge(const LevelAcc& o) {
        for (std::size_t i = 0; i < sumP.size(); ++i) {
            sumP[i] += o.sumP[i];
            sumP2[i] += o.sumP2[i];
        }
        sumMax += o.sumMax;
        sumMax2 += o.sumMax2;
    }
};

struct BlockAcc {
    // [mass][level] main grid, [mass][level] control grid, [mass] momentum
    std::vector<std::vector<LevelAcc>> main, control;
    std::vector<std::vector<double>> sumU2;
    std::int64_t sentinels = 0, used = 0;

    void init(const StudyPlan& plan, int levels) {
        main.assign(plan.masses.size(), std::vector<LevelAcc>(levels));
        control.assign(plan.masses.size(), std::vector<LevelAcc>(levels));
        sumU2.assign(plan.masses.size(),
                     std::vector<double>(plan.obs_steps + 1, 0.0));
        for (std::size_t j = 0; j < plan.masses.size(); ++j)
            for (int l = 0; l < levels; ++l) {
                main[j][l].init(plan.obs_steps);
                if (plan.masses[j].control) control[j][l].init(plan.obs_steps);
            }
    }
    void merge(const BlockAcc& o) {
        for (std::size_t j = 0; j < main.size(); ++j) {
            for (std::size_t l = 0; l < main[j].size(); ++l) {
                main[j][l].merge(o.main[j][l]);
                if (!control[j][l].sumP.empty() && !o.control[j][l].sumP.empty())
                    control[j][l].merge(o.control[j][l]);
            }
            for (std::size_t i = 0; i < sumU2[j].size(); ++i)
                sumU2[j][i] += o.sumU2[j][i];
        }
        sentinels += o.sentinels;
        used += o.used;
    }
};

// One path's contribution (same layout), filled only if the whole coupled
// pipeline finished without a sentinel anywhere.
using PathAcc = BlockAcc;

// Run the coupled pipeline for one (path, grid): reference + levels.
// Returns false on any sentinel.
bool run_pipeline(const StudyConfig& c, const WienerGrid& grid, double m,
                  std::int64_t obs_stride, std::int64_t obs_steps,
                  std::vector<LevelAcc>* levels_out, std::vector<double>* u2_out) {
    const int n = c.model->dim();
    Vec q0 = Vec::Constant(n, c.q0);
    Vec z0 = Vec::Constant(n, c.z0);
    Vec u0 = std::sqrt(m) * z0;
    const bool fast_ok = c.fast_path != FastPath::Off;

    Trajectory ref = simulate_underdamped(*c.model, m, grid, q0, u0, c.ref_scheme,
                                          c.guard, fast_ok);
    if (ref.exploded) return false;

    HierarchyOptions hopts;
    hopts.scheme = c.level_scheme;
    hopts.fast_path = c.fast_path;
    hopts.guard = c.guard;
    hopts.z0 = z0;
    std::vector<HierarchyRun> runs;
    try {
        runs = run_hierarchy(*c.model, m, c.levels, grid, q0, hopts);
    } catch (const FastProcessDivergence&) {
        return false;
    }
    for (const auto& r : runs)
        if (r.sentinel) return false;

    for (int l = 0; l < c.levels; ++l) {
        LevelAcc& acc = (*levels_out)[l];
        const Trajectory& a = runs[l].traj;
        double maxv = 0.0;
        for (std::int64_t i = 0; i <= ref.steps; ++i) {
            double v2 = 0.0;
            const double* rq = ref.row(ref.q, i);
            const double* aq = a.row(a.q, i);
            for (int comp = 0; comp < n; ++comp) {
                double d = rq[comp] - aq[comp];
                v2 += d * d;
            }
            if (v2 > maxv) maxv = v2;
            if (i % obs_stride == 0) {
                double v = std::pow(v2, 0.5 * c.p);
                std::int64_t o = i / obs_stride;
                acc.sumP[o] += v;
                acc.sumP2[o] += v * v;
            }
        }
        double mp = std::pow(maxv, 0.5 * c.p);
        acc.sumMax += mp;
        acc.sumMax2 += mp * mp;
    }
    if (u2_out) {
        for (std::int64_t o = 0; o <= obs_steps; ++o) {
            const double* ur = ref.row(ref.u, o * obs_stride);
            double s = 0.0;
            for (int comp = 0; comp < n; ++comp) s += ur[comp] * ur[comp];
            (*u2_out)[o] += s;
        }
    }
    return true;
}

void parallel_blocks(std::int64_t paths, int threads,
                     const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& body,
                     std::int64_t n_blocks) {
    std::atomic<std::int64_t> next{0};
    int hw = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    auto worker = [&]() {
        for (;;) {
            std::int64_t b = next.fetch_add(1);
            if (b >= n_blocks) break;
            std::int64_t begin = b * paths / n_blocks;
            std::int64_t end = (b + 1) * paths / n_blocks;
            body(b, begin, end);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < hw; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

}  // namespace

ConvergenceReport convergence_study(const StudyConfig& c) {
    const StudyPlan plan = make_plan(c);
    const int k = c.model->noise_dim();
    const std::size_t n_masses = plan.masses.size();

    const std::int64_t n_blocks = std::min<std::int64_t>(64, c.paths);
    std::vector<BlockAcc> blocks(n_blocks);
    for (auto& b : blocks) b.init(plan, c.levels);

    parallel_blocks(
        c.paths, c.threads,
        [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
            PathAcc acc;
            for (std::int64_t path = begin; path < end; ++path) {
                acc.init(plan, c.levels);
                WienerGrid base(c.seed, static_cast<std::uint64_t>(path),
                                plan.base_steps, k, plan.base_dt);
                bool ok = true;
                for (std::size_t j = 0; ok && j < n_masses; ++j) {
                    const MassPlan& mp = plan.masses[j];
                    WienerGrid grid = base.coarsen(mp.factor);
                    ok = run_pipeline(c, grid, mp.m, mp.obs_stride, plan.obs_steps,
                                      &acc.main[j], &acc.sumU2[j]);
                    if (ok && mp.control) {
                        WienerGrid fine = base.coarsen(mp.factor / 2);
                        ok = run_pipeline(c, fine, mp.m, mp.obs_stride * 2,
                                          plan.obs_steps, &acc.control[j], nullptr);
                    }
                }
                if (ok) {
                    acc.used = 1;
                    blocks[b].merge(acc);
                } else {
                    ++blocks[b].sentinels;
                }
            }
        },
        n_blocks);

    BlockAcc total;
    total.init(plan, c.levels);
    for (const auto& b : blocks) total.merge(b);

    ConvergenceReport report;
    report.T = c.T;
    report.hbar = c.hbar;
    report.p = c.p;
    report.seed = c.seed;
    report.obs_points = plan.obs_steps + 1;
    report.total_paths = c.paths;
    report.sentinel_paths = total.sentinels;
    report.unreliable = total.sentinels > c.paths / 100;
    const std::int64_t used = total.used;

    for (const auto& mp : plan.masses) report.masses.push_back(mp.m);

    auto estimate = [&](const LevelAcc& acc) {
        ErrorEstimate e;
        e.used_paths = used;
        e.sentinels = total.sentinels;
        if (used == 0) return e;
        std::int64_t argmax = 0;
        for (std::size_t i = 1; i < acc.sumP.size(); ++i)
            if (acc.sumP[i] > acc.sumP[argmax]) argmax = static_cast<std::int64_t>(i);
        e.argmax_time_index = argmax;
        finish_error(mean_and_se(acc.sumP[argmax], acc.sumP2[argmax], used), c.p,
                     e.err_supE, e.stderr_supE);
        finish_error(mean_and_se(acc.sumMax, acc.sumMax2, used), c.p, e.err_Esup,
                     e.stderr_Esup);
        return e;
    };

    for (int l = 0; l < c.levels; ++l) {
        LevelReport lr;
        lr.level = l + 1;
        std::vector<double> errs_supE, errs_Esup;
        for (std::size_t j = 0; j < n_masses; ++j) {
            LevelPoint pt;
            pt.m = plan.masses[j].m;
            pt.err = estimate(total.main[j][l]);
            if (plan.masses[j].control && used > 0) {
                ErrorEstimate ctrl = estimate(total.control[j][l]);
                if (pt.err.err_supE > 0.0)
                    pt.control_shift_supE =
                        std::abs(ctrl.err_supE - pt.err.err_supE) / pt.err.err_supE;
                if (pt.err.err_Esup > 0.0)
                    pt.control_shift_Esup =
                        std::abs(ctrl.err_Esup - pt.err.err_Esup) / pt.err.err_Esup;
                pt.floor_limited =
                    (pt.control_shift_supE && *pt.control_shift_supE > 0.20) ||
                    pt.err.err_supE < 1e-13;
            } else {
                pt.floor_limited = pt.err.err_supE < 1e-13;
            }
            errs_supE.push_back(pt.err.err_supE);
            errs_Esup.push_back(pt.err.err_Esup);
            lr.points.push_back(pt);
        }
        try {
            lr.slope_supE = fit_slope(report.masses, errs_supE);
        } catch (const InsufficientDataError&) {
        }
        try {
            lr.slope_Esup = fit_slope(report.masses, errs_Esup);
        } catch (const InsufficientDataError&) {
        }
        report.levels.push_back(std::move(lr));
    }

    for (std::size_t j = 0; j < n_masses; ++j) {
        double sup = 0.0;
        if (used > 0)
            for (double s : total.sumU2[j]) sup = std::max(sup, s / used);
        report.momentum_sup.push_back(std::sqrt(sup));
    }
    try {
        report.momentum_slope = fit_slope(report.masses, report.momentum_sup);
    } catch (const InsufficientDataError&) {
    }
    return report;
}

ProbReport prob_convergence_study(const StudyConfig& c) {
    StudyConfig cc = c;
    if (c.cutoff_r > 0.0) cc.model = cutoff_model(c.model, c.cutoff_r);
    const StudyPlan plan = make_plan(cc);
    const int k = cc.model->noise_dim();
    const int n = cc.model->dim();
    const std::size_t n_masses = plan.masses.size();
    const int level = cc.levels;

    struct ProbAcc {
        std::vector<std::int64_t> exceed;
        std::vector<double> excursion;
        std::int64_t sentinels = 0, used = 0;
    };
    const std::int64_t n_blocks = std::min<std::int64_t>(64, cc.paths);
    std::vector<ProbAcc> blocks(n_blocks);
    for (auto& b : blocks) {
        b.exceed.assign(n_masses, 0);
        b.excursion.assign(n_masses, 0.0);
    }

    parallel_blocks(
        cc.paths, cc.threads,
        [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
            Vec q0 = Vec::Constant(n, cc.q0);
            Vec z0 = Vec::Constant(n, cc.z0);
            HierarchyOptions hopts;
            hopts.scheme = cc.level_scheme;
            hopts.fast_path = cc.fast_path;
            hopts.guard = cc.guard;
            hopts.z0 = z0;
            std::vector<std::int64_t> exceed(n_masses, 0);
            std::vector<double> excursion(n_masses, 0.0);
            for (std::int64_t path = begin; path < end; ++path) {
                WienerGrid base(cc.seed, static_cast<std::uint64_t>(path),
                                plan.base_steps, k, plan.base_dt);
                bool ok = true;
                std::fill(exceed.begin(), exceed.end(), 0);
                std::fill(excursion.begin(), excursion.end(), 0.0);
                for (std::size_t j = 0; ok && j < n_masses; ++j) {
                    const MassPlan& mp = plan.masses[j];
                    WienerGrid grid = base.coarsen(mp.factor);
                    Vec u0 = std::sqrt(mp.m) * z0;
                    Trajectory ref = simulate_underdamped(
                        *cc.model, mp.m, grid, q0, u0, cc.ref_scheme, cc.guard,
                        cc.fast_path != FastPath::Off);
                    if (ref.exploded) {
                        ok = false;
                        break;
                    }
                    std::vector<HierarchyRun> runs;
                    try {
                        runs = run_hierarchy(*cc.model, mp.m, level, grid, q0, hopts);
                    } catch (const FastProcessDivergence&) {
                        ok = false;
                        break;
                    }
                    for (const auto& r : runs) ok = ok && !r.sentinel;
                    if (!ok) break;
                    const Trajectory& a = runs[level - 1].traj;
                    double maxd = 0.0, maxq = 0.0;
                    for (std::int64_t i = 0; i <= ref.steps; ++i) {
                        const double* rq = ref.row(ref.q, i);
                        const double* aq = a.row(a.q, i);
                        double d2 = 0.0, q2 = 0.0;
                        for (int comp = 0; comp < n; ++comp) {
                            double d = rq[comp] - aq[comp];
                            d2 += d * d;
                            q2 += rq[comp] * rq[comp];
                        }
                        if (d2 > maxd) maxd = d2;
                        if (q2 > maxq) maxq = q2;
                    }
                    double ratio = std::sqrt(maxd) / std::pow(mp.m, 0.5 * level - cc.eps);
                    if (ratio > cc.delta) exceed[j] = 1;
                    excursion[j] = std::sqrt(maxq);
                }
                if (ok) {
                    ++blocks[b].used;
                    for (std::size_t j = 0; j < n_masses; ++j) {
                        blocks[b].exceed[j] += exceed[j];
                        blocks[b].excursion[j] =
                            std::max(blocks[b].excursion[j], excursion[j]);
                    }
                } else {
                    ++blocks[b].sentinels;
                }
            }
        },
        n_blocks);

    ProbReport report;
    report.level = level;
    report.delta = cc.delta;
    report.eps = cc.eps;
    report.r = cc.cutoff_r;
    report.seed = cc.seed;
    std::vector<std::int64_t> exceed(n_masses, 0);
    std::vector<double> excursion(n_masses, 0.0);
    std::int64_t used = 0;
    for (const auto& b : blocks) {
        used += b.used;
        report.sentinel_paths += b.sentinels;
        for (std::size_t j = 0; j < n_masses; ++j) {
            exceed[j] += b.exceed[j];
            excursion[j] = std::max(excursion[j], b.excursion[j]);
        }
    }
    for (std::size_t j = 0; j < n_masses; ++j) {
        ProbPoint pt;
        pt.m = plan.masses[j].m;
        pt.exceed = exceed[j];
        pt.used_paths = used;
        pt.max_excursion = excursion[j];
        if (used > 0) {
            const double z = 1.96;
            double phat = static_cast<double>(exceed[j]) / used;
            double denom = 1.0 + z * z / used;
            double center = (phat + z * z / (2.0 * used)) / denom;
            double half = z *
                          std::sqrt(phat * (1.0 - phat) / used +
                                    z * z / (4.0 * static_cast<double>(used) * used)) /
                          denom;
            pt.fraction = phat;
            pt.ci_low = std::max(0.0, center - half);
            pt.ci_high = std::min(1.0, center + half);
        }
        if (cc.cutoff_r > 0.0 && pt.max_excursion >= cc.cutoff_r)
            report.cutoff_dominated = true;
        report.points.push_back(pt);
    }
    for (std::size_t j = 1; j < report.points.size(); ++j)
        if (report.points[j].ci_low > report.points[j - 1].ci_high)
            report.nonincreasing_ok = false;
    return report;
}

}  // namespace smallmass
