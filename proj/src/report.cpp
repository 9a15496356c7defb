#include "smallmass/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace smallmass {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

Json config_json(const RunConfig& config) {
    Json j = Json::object();
    for (const auto& [key, value] : config.values) j[key] = value;
    return j;
}

Json slope_json(const std::optional<SlopeFit>& fit) {
    if (!fit) return nullptr;
    Json j = Json::object();
    j["slope"] = fit->slope;
    j["ci95"] = fit->ci95;
    j["intercept"] = fit->intercept;
    j["points_used"] = fit->points_used;
    j["points_dropped"] = fit->points_dropped;
    return j;
}

}  // namespace

std::string config_echo_comment(const RunConfig& config) {
    std::ostringstream out;
    for (const auto& [key, value] : config.values) out << "# " << key << " = " << value << "\n";
    return out.str();
}

std::string errors_csv(const RunConfig& config, const ConvergenceReport& report) {
    std::ostringstream out;
    out << config_echo_comment(config);
    out << "level,m,err_supE,stderr_supE,err_Esup,stderr_Esup,sentinels\n";
    for (const auto& level : report.levels)
        for (const auto& pt : level.points)
            out << level.level << ',' << fmt(pt.m) << ',' << fmt(pt.err.err_supE) << ','
                << fmt(pt.err.stderr_supE) << ',' << fmt(pt.err.err_Esup) << ','
                << fmt(pt.err.stderr_Esup) << ',' << pt.err.sentinels << "\n";
    return out.str();
}

std::string report_json(const RunConfig& config, const ConvergenceReport& report) {
    Json j;
    j["config"] = config_json(config);
    j["masses"] = report.masses;
    Json levels = Json::array();
    for (const auto& level : report.levels) {
        Json lj;
        lj["level"] = level.level;
        lj["slope_supE"] = level.slope_supE ? Json(level.slope_supE->slope) : Json(nullptr);
        lj["ci95_supE"] = level.slope_supE ? Json(level.slope_supE->ci95) : Json(nullptr);
        lj["slope_Esup"] = level.slope_Esup ? Json(level.slope_Esup->slope) : Json(nullptr);
        lj["ci95_Esup"] = level.slope_Esup ? Json(level.slope_Esup->ci95) : Json(nullptr);
        lj["fit_supE"] = slope_json(level.slope_supE);
        lj["fit_Esup"] = slope_json(level.slope_Esup);
        Json points = Json::array();
        for (const auto& pt : level.points) {
            Json pj;
            pj["m"] = pt.m;
            pj["err_supE"] = pt.err.err_supE;
            pj["stderr_supE"] = pt.err.stderr_supE;
            pj["err_Esup"] = pt.err.err_Esup;
            pj["stderr_Esup"] = pt.err.stderr_Esup;
            pj["sentinels"] = pt.err.sentinels;
            pj["used_paths"] = pt.err.used_paths;
            pj["argmax_time_index"] = pt.err.argmax_time_index;
            pj["control_shift_supE"] =
                pt.control_shift_supE ? Json(*pt.control_shift_supE) : Json(nullptr);
            pj["control_shift_Esup"] =
                pt.control_shift_Esup ? Json(*pt.control_shift_Esup) : Json(nullptr);
            pj["floor_limited"] = pt.floor_limited;
            points.push_back(std::move(pj));
        }
        lj["points"] = std::move(points);
        levels.push_back(std::move(lj));
    }
    j["per_level"] = std::move(levels);
    Json mom;
    mom["sup"] = report.momentum_sup;
    mom["fit"] = slope_json(report.momentum_slope);
    j["momentum"] = std::move(mom);
    j["paths"] = report.total_paths;
    j["sentinel_paths"] = report.sentinel_paths;
    j["unreliable"] = report.unreliable;
    j["obs_points"] = report.obs_points;
    j["seed"] = report.seed;
    j["T"] = report.T;
    j["hbar"] = report.hbar;
    j["p"] = report.p;
    return j.dump(2) + "\n";
}

std::string summary_from_report_json(const std::string& json_text) {
    Json j = Json::parse(json_text);
    std::ostringstream out;
    std::string model = "?";
    if (j.contains("config") && j["config"].contains("model.name"))
        model = j["config"]["model.name"].get<std::string>();
    out << "model " << model << ", paths " << j["paths"].get<long long>() << ", seed "
        << j["seed"].get<unsigned long long>() << ", sentinels "
        << j["sentinel_paths"].get<long long>()
        << (j["unreliable"].get<bool>() ? " [UNRELIABLE]" : "") << "\n";
    for (const auto& level : j["per_level"]) {
        out << "level " << level["level"].get<int>() << ":";
        if (level["slope_supE"].is_null())
            out << " slope_supE = insufficient-data";
        else
            out << " slope_supE = " << fmt6(level["slope_supE"].get<double>()) << " +- "
                << fmt6(level["ci95_supE"].get<double>());
        if (level["slope_Esup"].is_null())
            out << ", slope_Esup = insufficient-data";
        else
            out << ", slope_Esup = " << fmt6(level["slope_Esup"].get<double>()) << " +- "
                << fmt6(level["ci95_Esup"].get<double>());
        out << "\n";
        for (const auto& pt : level["points"]) {
            out << "  m = " << fmt6(pt["m"].get<double>())
                << ": err_supE = " << fmt6(pt["err_supE"].get<double>())
                << " (se " << fmt6(pt["stderr_supE"].get<double>())
                << "), err_Esup = " << fmt6(pt["err_Esup"].get<double>()) << " (se "
                << fmt6(pt["stderr_Esup"].get<double>()) << ")";
            if (pt["floor_limited"].get<bool>()) out << " [floor-limited]";
            if (!pt["control_shift_supE"].is_null())
                out << " [control shift " << fmt6(pt["control_shift_supE"].get<double>())
                    << "]";
            out << "\n";
        }
    }
    if (j.contains("momentum") && !j["momentum"]["fit"].is_null())
        out << "momentum: slope = " << fmt6(j["momentum"]["fit"]["slope"].get<double>())
            << " +- " << fmt6(j["momentum"]["fit"]["ci95"].get<double>()) << "\n";
    return out.str();
}

std::string exceedance_csv(const RunConfig& config, const ProbReport& report) {
    std::ostringstream out;
    out << config_echo_comment(config);
    out << "m,fraction,ci_low,ci_high,exceed,used_paths,max_excursion\n";
    for (const auto& pt : report.points)
        out << fmt(pt.m) << ',' << fmt(pt.fraction) << ',' << fmt(pt.ci_low) << ','
            << fmt(pt.ci_high) << ',' << pt.exceed << ',' << pt.used_paths << ','
            << fmt(pt.max_excursion) << "\n";
    return out.str();
}

std::string exceedance_json(const RunConfig& config, const ProbReport& report) {
    Json j;
    j["config"] = config_json(config);
    j["level"] = report.level;
    j["delta"] = report.delta;
    j["eps"] = report.eps;
    j["r"] = report.r;
    j["seed"] = report.seed;
    j["sentinel_paths"] = report.sentinel_paths;
    j["cutoff_dominated"] = report.cutoff_dominated;
    j["nonincreasing_ok"] = report.nonincreasing_ok;
    Json points = Json::array();
    for (const auto& pt : report.points) {
        Json pj;
        pj["m"] = pt.m;
        pj["fraction"] = pt.fraction;
        pj["ci_low"] = pt.ci_low;
        pj["ci_high"] = pt.ci_high;
        pj["exceed"] = pt.exceed;
        pj["used_paths"] = pt.used_paths;
        pj["max_excursion"] = pt.max_excursion;
        points.push_back(std::move(pj));
    }
    j["points"] = std::move(points);
    return j.dump(2) + "\n";
}

std::string validation_json(const RunConfig& config, const ValidationReport& report) {
    Json j;
    j["config"] = config_json(config);
    j["probes"] = report.probes;
    j["all_pass"] = report.all_pass;
    Json checks = Json::array();
    for (const auto& c : report.checks) {
        Json cj;
        cj["name"] = c.name;
        cj["max_residual"] = c.max_residual;
        cj["tolerance"] = c.tolerance;
        cj["pass"] = c.pass;
        cj["provenance"] = c.provenance;
        checks.push_back(std::move(cj));
    }
    j["checks"] = std::move(checks);
    Json bounds = Json::object();
    for (const auto& [name, value] : report.bounds) bounds[name] = value;
    j["bounds"] = std::move(bounds);
    return j.dump(2) + "\n";
}

std::string trajectory_csv(const RunConfig& config, const Trajectory& reference,
                           const std::vector<Trajectory>& levels) {
    std::ostringstream out;
    out << config_echo_comment(config);
    const int n = reference.n;
    out << "t";
    for (int c = 0; c < n; ++c) out << ",q_ref" << c;
    for (int c = 0; c < n; ++c) out << ",u_ref" << c;
    for (std::size_t l = 0; l < levels.size(); ++l)
        for (int c = 0; c < n; ++c) out << ",q_l" << (l + 1) << "_" << c;
    for (std::size_t l = 0; l < levels.size(); ++l)
        if (!levels[l].R.empty())
            for (int c = 0; c < n; ++c) out << ",R_l" << (l + 1) << "_" << c;
    out << "\n";
    for (std::int64_t i = 0; i <= reference.steps; ++i) {
        out << fmt(reference.time_at(i));
        for (int c = 0; c < n; ++c) out << ',' << fmt(reference.row(reference.q, i)[c]);
        for (int c = 0; c < n; ++c) out << ',' << fmt(reference.row(reference.u, i)[c]);
        for (const auto& traj : levels)
            for (int c = 0; c < n; ++c) out << ',' << fmt(traj.row(traj.q, i)[c]);
        for (const auto& traj : levels)
            if (!traj.R.empty())
                for (int c = 0; c < n; ++c) out << ',' << fmt(traj.row(traj.R, i)[c]);
        out << "\n";
    }
    return out.str();
}

std::string plot_script() {
    return R"PY(#!/usr/bin/env python3
"""Log-log error plot over errors.csv (first argument, default errors.csv)."""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "errors.csv"
rows = []
with open(path) as f:
    reader = csv.DictReader(r for r in f if not r.startswith("#"))
    for row in reader:
        rows.append(row)

levels = sorted({int(r["level"]) for r in rows})
fig, ax = plt.subplots(figsize=(6, 4.5))
for level in levels:
    pts = [r for r in rows if int(r["level"]) == level]
    m = [float(r["m"]) for r in pts]
    err = [float(r["err_supE"]) for r in pts]
    se = [float(r["stderr_supE"]) for r in pts]
    ax.errorbar(m, err, yerr=se, marker="o", label=f"level {level}")
    ref = [err[0] * (mi / m[0]) ** (level / 2.0) for mi in m]
    ax.plot(m, ref, ":", color="gray")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("mass m")
ax.set_ylabel("strong error (sup-of-mean)")
ax.legend()
ax.grid(True, which="both", alpha=0.3)
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=150)
print(out)
)PY";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace smallmass
