#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "smallmass/report.hpp"

namespace fs = std::filesystem;
using namespace smallmass;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides output.dir)");
    cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
    cmd->add_option("--override", args.overrides, "key=value configuration override")
        ->take_all();
}

RunConfig load_config(const CommonArgs& args) {
    RunConfig config = parse_config_file(args.config_path);
    for (const auto& o : args.overrides) apply_override(config, o);
    if (!args.out_dir.empty()) config.values["output.dir"] = args.out_dir;
    return config;
}

fs::path ensure_out_dir(const RunConfig& config) {
    fs::path dir = config.get_string("output.dir", "out");
    fs::create_directories(dir);
    return dir;
}

int cmd_converge(const CommonArgs& args) {
    RunConfig config = load_config(args);
    StudyConfig study = study_from_config(config, args.threads);
    ConvergenceReport report = convergence_study(study);
    fs::path dir = ensure_out_dir(config);
    std::string json = report_json(config, report);
    write_text_file((dir / "errors.csv").string(), errors_csv(config, report));
    write_text_file((dir / "report.json").string(), json);
    write_text_file((dir / "plot_errors.py").string(), plot_script());
    std::cout << summary_from_report_json(json);
    std::cout << "wrote " << (dir / "errors.csv").string() << ", report.json, plot_errors.py\n";
    return 0;
}

int cmd_probconverge(const CommonArgs& args) {
    RunConfig config = load_config(args);
    StudyConfig study = study_from_config(config, args.threads);
    if (!(study.cutoff_r > 0.0))
        throw ParseError("probconverge requires cutoff.r > 0");
    ProbReport report = prob_convergence_study(study);
    fs::path dir = ensure_out_dir(config);
    write_text_file((dir / "exceedance.csv").string(), exceedance_csv(config, report));
    write_text_file((dir / "exceedance.json").string(), exceedance_json(config, report));
    for (const auto& pt : report.points)
        std::cout << "m = " << pt.m << ": exceedance " << pt.fraction << " [" << pt.ci_low
                  << ", " << pt.ci_high << "] (" << pt.exceed << "/" << pt.used_paths
                  << ")\n";
    if (report.cutoff_dominated)
        std::cout << "warning: cutoff-dominated regime (excursions reached radius r)\n";
    std::cout << (report.nonincreasing_ok ? "table non-increasing within confidence\n"
                                          : "table NOT non-increasing\n");
    std::cout << "wrote " << (dir / "exceedance.csv").string() << ", exceedance.json\n";
    return 0;
}

int cmd_validate(const CommonArgs& args) {
    RunConfig config = load_config(args);
    ModelPtr model = model_from_config(config);
    if (config.get_double("cutoff.r", 0.0) > 0.0)
        model = cutoff_model(model, config.get_double("cutoff.r", 0.0));
    const int count = static_cast<int>(config.get_int("validate.probes", 200));
    const double radius = config.get_double("validate.radius", 3.0);
    const double tmax = config.get_double("validate.tmax", 1.0);
    const std::uint64_t seed =
        static_cast<std::uint64_t>(config.get_int("mc.seed", 0));
    auto probes = make_probes(*model, count, radius, tmax, seed);
    ValidationReport report = validate_model(*model, probes);
    fs::path dir = ensure_out_dir(config);
    write_text_file((dir / "validation.json").string(), validation_json(config, report));
    for (const auto& c : report.checks)
        std::cout << (c.pass ? "pass" : "FAIL") << "  " << c.name << " (max residual "
                  << c.max_residual << ", tol " << c.tolerance << ")\n";
    std::cout << "wrote " << (dir / "validation.json").string() << "\n";
    return report.all_pass ? 0 : 1;
}

int cmd_simulate(const CommonArgs& args) {
    RunConfig config = load_config(args);
    StudyConfig study = study_from_config(config, args.threads);
    const double mass = config.get_double("sim.mass", study.m0);
    const std::int64_t steps = std::llround(study.T / (study.hbar * mass));
    const double dt = study.T / static_cast<double>(steps);
    const int n = study.model->dim();
    fs::path dir = ensure_out_dir(config);

    HierarchyOptions hopts;
    hopts.scheme = study.level_scheme;
    hopts.fast_path = study.fast_path;
    hopts.guard = study.guard;
    hopts.z0 = Vec::Constant(n, study.z0);
    Vec q0 = Vec::Constant(n, study.q0);
    Vec u0 = std::sqrt(mass) * hopts.z0;

    for (std::int64_t path = 0; path < study.paths; ++path) {
        WienerGrid grid(study.seed, static_cast<std::uint64_t>(path), steps,
                        study.model->noise_dim(), dt);
        Trajectory ref = simulate_underdamped(*study.model, mass, grid, q0, u0,
                                              study.ref_scheme, study.guard,
                                              study.fast_path != FastPath::Off);
        auto runs = run_hierarchy(*study.model, mass, study.levels, grid, q0, hopts);
        std::vector<Trajectory> levels;
        levels.reserve(runs.size());
        for (auto& r : runs) levels.push_back(std::move(r.traj));
        std::string name = "traj_p" + std::to_string(path) + ".csv";
        write_text_file((dir / name).string(), trajectory_csv(config, ref, levels));
    }
    std::cout << "wrote " << study.paths << " trajectory files to " << dir.string()
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Langevin small-mass hierarchy simulations"};
    app.require_subcommand(1);

    CommonArgs sim_args, conv_args, prob_args, val_args;
    CLI::App* sim = app.add_subcommand("simulate", "write per-trajectory CSV files");
    add_common(sim, sim_args);
    CLI::App* conv =
        app.add_subcommand("converge", "coupled mass sweep with fitted error slopes");
    add_common(conv, conv_args);
    CLI::App* prob = app.add_subcommand("probconverge",
                                        "convergence-in-probability exceedance table");
    add_common(prob, prob_args);
    CLI::App* val = app.add_subcommand("validate", "model coefficient checks");
    add_common(val, val_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(sim_args);
        if (conv->parsed()) return cmd_converge(conv_args);
        if (prob->parsed()) return cmd_probconverge(prob_args);
        if (val->parsed()) return cmd_validate(val_args);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
