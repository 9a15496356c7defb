#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smallmass/report.hpp"

namespace py = pybind11;
using namespace smallmass;

namespace {

py::array_t<double> flat_to_array(const std::vector<double>& data, std::int64_t rows,
                                  int cols) {
    py::array_t<double> out({static_cast<py::ssize_t>(rows),
                             static_cast<py::ssize_t>(cols)});
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

// pybind-version-portable handle around the shared model pointer
struct ModelHandle {
    ModelPtr ptr;
};

py::dict trajectory_dict(const Trajectory& traj) {
    py::dict d;
    d["dt"] = traj.dt;
    d["q"] = flat_to_array(traj.q, traj.steps + 1, traj.n);
    if (!traj.u.empty()) d["u"] = flat_to_array(traj.u, traj.steps + 1, traj.n);
    if (!traj.z.empty()) d["z"] = flat_to_array(traj.z, traj.steps + 1, traj.n);
    if (!traj.R.empty()) d["R"] = flat_to_array(traj.R, traj.steps + 1, traj.n);
    d["exploded"] = traj.exploded;
    return d;
}

RunConfig config_from_dict(const py::dict& values) {
    RunConfig config;
    config.source = "<dict>";
    for (auto item : values)
        config.values[py::str(item.first)] = py::str(item.second);
    return config;
}

UnderdampedScheme ref_scheme_of(const std::string& name) {
    if (name == "exp") return UnderdampedScheme::Exponential;
    if (name == "em") return UnderdampedScheme::EulerMaruyama;
    throw ParseError("underdamped scheme must be exp or em");
}

PositionScheme pos_scheme_of(const std::string& name) {
    if (name == "em") return PositionScheme::EulerMaruyama;
    if (name == "milstein") return PositionScheme::Milstein;
    throw ParseError("position scheme must be em or milstein");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Langevin small-mass hierarchy: coefficient fields, integrators, "
              "and coupled Monte Carlo studies.";

    py::register_exception<Error>(m, "SmallmassError");

    py::class_<ModelHandle>(m, "Model")
        .def_property_readonly("dim", [](const ModelHandle& h) { return h.ptr->dim(); })
        .def_property_readonly("noise_dim",
                               [](const ModelHandle& h) { return h.ptr->noise_dim(); })
        .def_property_readonly(
            "spectral_floor",
            [](const ModelHandle& h) { return h.ptr->spectral_floor(); })
        .def_property_readonly("name",
                               [](const ModelHandle& h) { return h.ptr->name(); });

    m.def("make_model",
          [](const std::string& name, const std::map<std::string, double>& params) {
              return ModelHandle{make_model(name, params)};
          },
          py::arg("name"), py::arg("params") = std::map<std::string, double>{});
    m.def("cutoff_model",
          [](const ModelHandle& h, double r) { return ModelHandle{cutoff_model(h.ptr, r)}; },
          py::arg("model"), py::arg("r"));

    m.def("tilde_gamma",
          [](const ModelHandle& model, double t, const Vec& q) {
              DerivativeBundle b = eval_tilde_gamma(*model.ptr, t, q, 0);
              return py::make_tuple(b.tg, b.tg_inv);
          },
          py::arg("model"), py::arg("t"), py::arg("q"),
          "effective drag and its inverse at (t, q)");
    m.def("total_force",
          [](const ModelHandle& model, double t, const Vec& q) {
              return total_force(*model.ptr, t, q);
          });
    m.def("noise_induced_drift",
          [](const ModelHandle& model, double t, const Vec& q, bool shortcut) {
              return noise_induced_drift(*model.ptr, t, q, shortcut);
          },
          py::arg("model"), py::arg("t"), py::arg("q"),
          py::arg("fluctuation_dissipation") = false);
    m.def("qg_tensor",
          [](const ModelHandle& model, double t, const Vec& q) {
              QGTensor T = qg_tensor(*model.ptr, t, q);
              const int n = T.n;
              py::array_t<double> tt({n, n, n});
              py::array_t<double> dt({n, n, n});
              py::array_t<double> dq({n, n, n, n});
              auto a = tt.mutable_unchecked<3>();
              auto b = dt.mutable_unchecked<3>();
              auto c = dq.mutable_unchecked<4>();
              for (int i = 0; i < n; ++i)
                  for (int x = 0; x < n; ++x)
                      for (int y = 0; y < n; ++y) {
                          a(i, x, y) = T.T[i](x, y);
                          b(i, x, y) = T.dT_dt[i](x, y);
                          for (int k = 0; k < n; ++k) c(k, i, x, y) = T.dT_dq[k][i](x, y);
                      }
              py::dict out;
              out["T"] = tt;
              out["dT_dq"] = dq;
              out["dT_dt"] = dt;
              return out;
          });

    m.def("mat_exp", &mat_exp, py::arg("A"), py::arg("s") = 1.0);
    m.def("solve_lyapunov", &solve_lyapunov, py::arg("Gamma"), py::arg("Sym"));

    py::class_<WienerGrid>(m, "WienerGrid")
        .def(py::init<std::uint64_t, std::uint64_t, std::int64_t, int, double>(),
             py::arg("seed"), py::arg("path_id"), py::arg("steps"), py::arg("k"),
             py::arg("dt"))
        .def_property_readonly("dt", &WienerGrid::dt)
        .def_property_readonly("steps", &WienerGrid::steps)
        .def("coarsen", &WienerGrid::coarsen)
        .def("endpoint", &WienerGrid::endpoint)
        .def("increments", [](const WienerGrid& g) {
            py::array_t<double> out({static_cast<py::ssize_t>(g.steps()),
                                     static_cast<py::ssize_t>(g.noise_dim())});
            double* dst = out.mutable_data();
            for (std::int64_t i = 0; i < g.steps(); ++i)
                for (int r = 0; r < g.noise_dim(); ++r) *dst++ = g.increment(i, r);
            return out;
        });

    m.def("simulate_underdamped",
          [](const ModelHandle& model, double mass, const WienerGrid& grid, const Vec& q0,
             const Vec& u0, const std::string& scheme) {
              return trajectory_dict(simulate_underdamped(*model.ptr, mass, grid, q0, u0,
                                                          ref_scheme_of(scheme)));
          },
          py::arg("model"), py::arg("mass"), py::arg("grid"), py::arg("q0"),
          py::arg("u0"), py::arg("scheme") = "exp");
    m.def("simulate_homogenized",
          [](const ModelHandle& model, const WienerGrid& grid, const Vec& q0,
             const std::string& scheme) {
              return trajectory_dict(
                  simulate_homogenized(*model.ptr, grid, q0, pos_scheme_of(scheme)));
          },
          py::arg("model"), py::arg("grid"), py::arg("q0"), py::arg("scheme") = "em");
    m.def("run_level",
          [](const ModelHandle& model, double mass, int level, const WienerGrid& grid,
             const Vec& q0, const std::string& scheme) {
              HierarchyOptions opts;
              opts.scheme = pos_scheme_of(scheme);
              HierarchyRun run = run_level(*model.ptr, mass, level, grid, q0, opts);
              py::dict d = trajectory_dict(run.traj);
              d["level"] = run.level;
              d["mass"] = run.mass;
              d["max_z_norm"] = run.max_z_norm;
              d["sentinel"] = run.sentinel;
              return d;
          },
          py::arg("model"), py::arg("mass"), py::arg("level"), py::arg("grid"),
          py::arg("q0"), py::arg("scheme") = "em");

    m.def("fit_slope", [](const std::vector<double>& masses,
                          const std::vector<double>& errors) {
        SlopeFit fit = fit_slope(masses, errors);
        py::dict d;
        d["slope"] = fit.slope;
        d["intercept"] = fit.intercept;
        d["ci95"] = fit.ci95;
        d["points_used"] = fit.points_used;
        return d;
    });

    m.def("validate_model_json",
          [](const py::dict& config_values, int probes, double radius, double tmax) {
              RunConfig config = config_from_dict(config_values);
              ModelPtr model = model_from_config(config);
              auto cloud = make_probes(
                  *model, probes, radius, tmax,
                  static_cast<std::uint64_t>(config.get_int("mc.seed", 0)));
              return validation_json(config, validate_model(*model, cloud));
          },
          py::arg("config"), py::arg("probes") = 100, py::arg("radius") = 2.5,
          py::arg("tmax") = 1.0);

    m.def("convergence_study_json",
          [](const py::dict& config_values, int threads) {
              RunConfig config = config_from_dict(config_values);
              StudyConfig study = study_from_config(config, threads);
              py::gil_scoped_release release;
              ConvergenceReport rep = convergence_study(study);
              return report_json(config, rep);
          },
          py::arg("config"), py::arg("threads") = 0);

    m.def("prob_convergence_study_json",
          [](const py::dict& config_values, int threads) {
              RunConfig config = config_from_dict(config_values);
              StudyConfig study = study_from_config(config, threads);
              py::gil_scoped_release release;
              ProbReport rep = prob_convergence_study(study);
              return exceedance_json(config, rep);
          },
          py::arg("config"), py::arg("threads") = 0);
}
