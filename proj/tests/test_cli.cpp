#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "smallmass/report.hpp"

using namespace smallmass;

namespace {

const char* kSample = R"(
# comment line
[model]
name = scalar-sin
params.gamma0 = 2.5
params.sigma = 1.0

[sim]
T = 0.5
hbar = 0.02
masses.m0 = 0.125
masses.count = 3
levels = 2
scheme = milstein
fast_path = scalar

[mc]
paths = 10
seed = 99

[error]
p = 2.0
)";

}  // namespace

TEST_CASE("config parser: sections, comments, params") {
    RunConfig c = parse_config_text(kSample, "sample");
    CHECK(c.get_string("model.name", "") == "scalar-sin");
    CHECK(c.get_double("model.params.gamma0", 0.0) == 2.5);
    CHECK(c.get_double("sim.T", 0.0) == 0.5);
    CHECK(c.get_int("mc.paths", 0) == 10);
    auto params = c.model_params();
    CHECK(params.size() == 2);
    CHECK(params.at("sigma") == 1.0);
}

TEST_CASE("config parser: diagnostics carry line numbers and key names") {
    CHECK_THROWS_WITH_AS(parse_config_text("a = 1\nnonsense line\n", "f"),
                         doctest::Contains("f:2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_config_text("[bad\n", "f"), doctest::Contains("f:1"),
                         ParseError);

    RunConfig missing = parse_config_text("[model]\nname = scalar-sin\n", "f");
    CHECK_THROWS_WITH_AS(study_from_config(missing, 0), doctest::Contains("mc.seed"),
                         ParseError);

    RunConfig bad_num = parse_config_text("[sim]\nT = abc\n", "f");
    CHECK_THROWS_WITH_AS(bad_num.get_double("sim.T", 1.0), doctest::Contains("sim.T"),
                         ParseError);
}

TEST_CASE("config to study mapping") {
    RunConfig c = parse_config_text(kSample, "sample");
    StudyConfig s = study_from_config(c, 3);
    CHECK(s.model->name() == "scalar-sin");
    CHECK(s.T == 0.5);
    CHECK(s.mass_count == 3);
    CHECK(s.paths == 10);
    CHECK(s.seed == 99);
    CHECK(s.threads == 3);
    CHECK(s.level_scheme == PositionScheme::Milstein);
    CHECK(s.ref_scheme == UnderdampedScheme::Exponential);
    CHECK(s.fast_path == FastPath::Scalar);

    apply_override(c, "sim.scheme=em");
    StudyConfig s2 = study_from_config(c, 0);
    CHECK(s2.ref_scheme == UnderdampedScheme::EulerMaruyama);
    CHECK(s2.level_scheme == PositionScheme::EulerMaruyama);

    apply_override(c, "sim.scheme=bogus");
    CHECK_THROWS_AS(study_from_config(c, 0), ParseError);
}

TEST_CASE("errors.csv schema and config echo") {
    RunConfig c = parse_config_text(kSample, "sample");
    StudyConfig s = study_from_config(c, 0);
    s.control = ControlMode::Off;
    ConvergenceReport rep = convergence_study(s);
    std::string csv = errors_csv(c, rep);
    CHECK(csv.find("# mc.seed = 99\n") != std::string::npos);
    CHECK(csv.find("level,m,err_supE,stderr_supE,err_Esup,stderr_Esup,sentinels\n") !=
          std::string::npos);
    // one row per (level, mass)
    int rows = 0;
    for (char ch : csv)
        if (ch == '\n') ++rows;
    CHECK(rows >= 2 + 2 * 3);
}

TEST_CASE("report round-trip: re-read json reproduces the printed summary") {
    RunConfig c = parse_config_text(kSample, "sample");
    StudyConfig s = study_from_config(c, 0);
    s.control = ControlMode::Off;
    ConvergenceReport rep = convergence_study(s);
    std::string json = report_json(c, rep);
    std::string printed = summary_from_report_json(json);

    auto path = std::filesystem::temp_directory_path() / "smallmass_report_test.json";
    write_text_file(path.string(), json);
    std::string reread = read_text_file(path.string());
    CHECK(reread == json);
    CHECK(summary_from_report_json(reread) == printed);
    std::filesystem::remove(path);

    CHECK(printed.find("slope_supE") != std::string::npos);
    CHECK(json.find("\"per_level\"") != std::string::npos);
}

TEST_CASE("validation json flags failures") {
    RunConfig c = parse_config_text(kSample, "sample");
    auto model = model_from_config(c);
    auto probes = make_probes(*model, 50, 2.0, 1.0, 5);
    ValidationReport rep = validate_model(*model, probes);
    std::string json = validation_json(c, rep);
    CHECK(json.find("\"all_pass\": true") != std::string::npos);
}

TEST_CASE("plot script is static text over errors.csv") {
    std::string script = plot_script();
    CHECK(script.find("errors.csv") != std::string::npos);
    CHECK(script == plot_script());
}
