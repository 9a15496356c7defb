#include "smallmass/validate.hpp"

#include <cmath>

#include "smallmass/noise.hpp"

namespace smallmass {

namespace {

// Relative residual against the larger of 1 and the reference scale.
double rel(double err, double scale) { return err / std::max(1.0, scale); }

struct Accumulator {
    CheckResult result;
    explicit Accumulator(std::string name, double tol, std::string provenance) {
        result.name = std::move(name);
        result.tolerance = tol;
        result.provenance = std::move(provenance);
    }
    void add(double residual) {
        if (residual > result.max_residual) result.max_residual = residual;
    }
    CheckResult finish() {
        result.pass = result.max_residual <= result.tolerance;
        return result;
    }
};

}  // namespace

std::vector<std::pair<double, Vec>> make_probes(const Model& model, int count,
                                                double radius, double t_max,
                                                std::uint64_t seed) {
    std::vector<std::pair<double, Vec>> probes;
    probes.reserve(count);
    const int n = model.dim();
    for (int p = 0; p < count; ++p) {
        Vec q(n);
        for (int i = 0; i < n; ++i) {
            // keyed_normal gives a deterministic cloud; squash to a bounded box.
            double z = keyed_normal(seed, p, 0, static_cast<std::uint32_t>(i));
            q(i) = radius * std::tanh(0.5 * z);
        }
        double zt = keyed_normal(seed, p, 1, 0);
        double t = t_max * 0.5 * (1.0 + std::tanh(0.5 * zt));
        probes.emplace_back(t, std::move(q));
    }
    return probes;
}

ValidationReport validate_model(const Model& model,
                                const std::vector<std::pair<double, Vec>>& probes) {
    if (probes.empty()) throw Error("validate_model: probe list is empty");
    const int n = model.dim();
    const int k = model.noise_dim();
    const auto prov = model.derivative_provenance();
    const double lambda = model.spectral_floor();

    ValidationReport report;
    report.probes = static_cast<int>(probes.size());

    Accumulator sym("gamma symmetry", 1e-12, "exact");
    Accumulator floor("gamma spectral floor", 1e-10, "exact");
    Accumulator inv("tilde_gamma inverse residual", 1e-10, "exact");
    Accumulator sympart("symmetric part of tilde_gamma equals gamma", 1e-12, "exact");
    Accumulator gradv("gradV vs finite difference of V",
                      prov.gradV ? 1e-8 : 1e-5, prov.gradV ? "analytic" : "finite-difference");
    Accumulator dgq("dgamma_dq vs finite difference", 1e-5, "analytic");
    Accumulator dgt("dgamma_dt vs finite difference", 1e-5, "analytic");
    Accumulator d2gqq("d2gamma_dqdq vs finite difference", 1e-5, "analytic");
    Accumulator d2gtq("d2gamma_dtdq vs finite difference", 1e-5, "analytic");
    Accumulator dpq("dpsi_dq vs finite difference", 1e-5, "analytic");
    Accumulator d2pqq("d2psi_dqdq vs finite difference", 1e-5, "analytic");
    Accumulator d3pqqq("d3psi_dqdqdq vs finite difference", 1e-4, "analytic");
    Accumulator dsq("dsigma_dq vs finite difference", 1e-5, "analytic");

    double max_gamma = 0.0, max_sigma = 0.0, max_force = 0.0, max_psi = 0.0;

    Mat g(n, n), gp(n, n), gm(n, n), d(n, n);
    Vec v(n), vp(n), vm(n);

    for (const auto& [t, q] : probes) {
        model.gamma(t, q, g);
        sym.add((g - g.transpose()).cwiseAbs().maxCoeff());
        floor.add(std::max(0.0, lambda - min_sym_eigenvalue(g)));
        max_gamma = std::max(max_gamma, g.cwiseAbs().maxCoeff());

        DerivativeBundle b = eval_tilde_gamma(model, t, q, 0);
        inv.add((b.tg_inv * b.tg - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
        sympart.add((0.5 * (b.tg + b.tg.transpose()) - g).cwiseAbs().maxCoeff());

        Mat s(n, k);
        model.sigma(t, q, s);
        max_sigma = std::max(max_sigma, s.cwiseAbs().maxCoeff());
        Vec f = total_force(model, t, q);
        max_force = std::max(max_force, f.cwiseAbs().maxCoeff());
        Vec ps(n);
        model.psi(t, q, ps);
        max_psi = std::max(max_psi, ps.cwiseAbs().maxCoeff());

        // gradient of the potential against central differences of V
        {
            const double h = std::max(1e-5, 1e-5 * q.norm());
            Vec grad(n), qp = q, qm = q;
            model.gradV(t, q, grad);
            for (int i = 0; i < n; ++i) {
                qp(i) = q(i) + h;
                qm(i) = q(i) - h;
                double fd = (model.V(t, qp) - model.V(t, qm)) / (2.0 * h);
                gradv.add(rel(std::abs(grad(i) - fd), std::abs(grad(i))));
                qp(i) = q(i);
                qm(i) = q(i);
            }
        }

        // one-level finite-difference checks of analytic suppliers
        const double h = std::max(1e-5, 1e-5 * q.norm());
        if (prov.dgamma_dq) {
            Vec qp = q, qm = q;
            for (int i = 0; i < n; ++i) {
                qp(i) = q(i) + h;
                qm(i) = q(i) - h;
                model.gamma(t, qp, gp);
                model.gamma(t, qm, gm);
                model.dgamma_dq(t, q, i, d);
                dgq.add(rel((d - (gp - gm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                            d.cwiseAbs().maxCoeff()));
                qp(i) = q(i);
                qm(i) = q(i);
            }
        }
        if (prov.dgamma_dt) {
            model.gamma(t + h, q, gp);
            model.gamma(t - h, q, gm);
            model.dgamma_dt(t, q, d);
            dgt.add(rel((d - (gp - gm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                        d.cwiseAbs().maxCoeff()));
        }
        if (prov.d2gamma_dqdq) {
            Vec qp = q, qm = q;
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                    qp(i) = q(i) + h;
                    qm(i) = q(i) - h;
                    model.dgamma_dq(t, qp, j, gp);
                    model.dgamma_dq(t, qm, j, gm);
                    model.d2gamma_dqdq(t, q, i, j, d);
                    d2gqq.add(rel((d - (gp - gm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                                  d.cwiseAbs().maxCoeff()));
                    qp(i) = q(i);
                    qm(i) = q(i);
                }
        }
        if (prov.d2gamma_dtdq) {
            for (int i = 0; i < n; ++i) {
                model.dgamma_dq(t + h, q, i, gp);
                model.dgamma_dq(t - h, q, i, gm);
                model.d2gamma_dtdq(t, q, i, d);
                d2gtq.add(rel((d - (gp - gm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                              d.cwiseAbs().maxCoeff()));
            }
        }
        if (!model.traits().psi_zero) {
            Vec qp = q, qm = q;
            if (prov.dpsi_dq) {
                for (int i = 0; i < n; ++i) {
                    qp(i) = q(i) + h;
                    qm(i) = q(i) - h;
                    model.psi(t, qp, vp);
                    model.psi(t, qm, vm);
                    model.dpsi_dq(t, q, i, v);
                    dpq.add(rel((v - (vp - vm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                                v.cwiseAbs().maxCoeff()));
                    qp(i) = q(i);
                    qm(i) = q(i);
                }
            }
            if (prov.d2psi_dqdq) {
                for (int i = 0; i < n; ++i)
                    for (int j = i; j < n; ++j) {
                        qp(i) = q(i) + h;
                        qm(i) = q(i) - h;
                        model.dpsi_dq(t, qp, j, vp);
                        model.dpsi_dq(t, qm, j, vm);
                        model.d2psi_dqdq(t, q, i, j, v);
                        d2pqq.add(rel((v - (vp - vm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                                      v.cwiseAbs().maxCoeff()));
                        qp(i) = q(i);
                        qm(i) = q(i);
                    }
            }
            if (prov.d3psi_dqdqdq) {
                for (int i = 0; i < n; ++i) {
                    qp(i) = q(i) + h;
                    qm(i) = q(i) - h;
                    model.d2psi_dqdq(t, qp, 0, n - 1, vp);
                    model.d2psi_dqdq(t, qm, 0, n - 1, vm);
                    model.d3psi_dqdqdq(t, q, i, 0, n - 1, v);
                    d3pqqq.add(rel((v - (vp - vm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                                   v.cwiseAbs().maxCoeff()));
                    qp(i) = q(i);
                    qm(i) = q(i);
                }
            }
        }
        if (prov.dsigma_dq) {
            Vec qp = q, qm = q;
            Mat sp(n, k), sm(n, k), sd(n, k);
            for (int i = 0; i < n; ++i) {
                qp(i) = q(i) + h;
                qm(i) = q(i) - h;
                model.sigma(t, qp, sp);
                model.sigma(t, qm, sm);
                model.dsigma_dq(t, q, i, sd);
                dsq.add(rel((sd - (sp - sm) / (2.0 * h)).cwiseAbs().maxCoeff(),
                            sd.cwiseAbs().maxCoeff()));
                qp(i) = q(i);
                qm(i) = q(i);
            }
        }
    }

    report.checks.push_back(sym.finish());
    report.checks.push_back(floor.finish());
    report.checks.push_back(inv.finish());
    report.checks.push_back(sympart.finish());
    report.checks.push_back(gradv.finish());
    if (prov.dgamma_dq) report.checks.push_back(dgq.finish());
    if (prov.dgamma_dt) report.checks.push_back(dgt.finish());
    if (prov.d2gamma_dqdq) report.checks.push_back(d2gqq.finish());
    if (prov.d2gamma_dtdq) report.checks.push_back(d2gtq.finish());
    if (!model.traits().psi_zero) {
        if (prov.dpsi_dq) report.checks.push_back(dpq.finish());
        if (prov.d2psi_dqdq) report.checks.push_back(d2pqq.finish());
        if (prov.d3psi_dqdqdq) report.checks.push_back(d3pqqq.finish());
    }
    if (prov.dsigma_dq) report.checks.push_back(dsq.finish());

    report.bounds = {{"gamma", max_gamma},
                     {"sigma", max_sigma},
                     {"force", max_force},
                     {"psi", max_psi}};
    for (const auto& c : report.checks) report.all_pass = report.all_pass && c.pass;
    return report;
}

}  // namespace smallmass
