#include "smallmass/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace smallmass {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

std::string RunConfig::require_string(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end())
        throw ParseError(source + ": missing required key '" + key + "'");
    return it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(source + ": key '" + key + "' is not a number: '" +
                         it->second + "'");
    }
}

std::int64_t RunConfig::get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t pos = 0;
        std::int64_t v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(source + ": key '" + key + "' is not an integer: '" +
                         it->second + "'");
    }
}

std::map<std::string, double> RunConfig::model_params() const {
    std::map<std::string, double> params;
    const std::string prefix = "model.params.";
    for (const auto& [key, value] : values) {
        if (key.rfind(prefix, 0) == 0)
            params[key.substr(prefix.size())] = get_double(key, 0.0);
    }
    return params;
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
    RunConfig config;
    config.source = source;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(source + ":" + std::to_string(lineno) +
                                 ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(source + ":" + std::to_string(lineno) +
                             ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(source + ":" + std::to_string(lineno) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        config.values[key] = value;
    }
    return config;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

void apply_override(RunConfig& config, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ParseError("--override expects key=value, got '" + assignment + "'");
    config.values[assignment.substr(0, eq)] = assignment.substr(eq + 1);
}

ModelPtr model_from_config(const RunConfig& config) {
    ModelPtr model = make_model(config.require_string("model.name"),
                                config.model_params());
    return model;
}

StudyConfig study_from_config(const RunConfig& config, int threads) {
    StudyConfig c;
    c.model = model_from_config(config);
    c.T = config.get_double("sim.T", 1.0);
    c.hbar = config.get_double("sim.hbar", 0.01);
    c.m0 = config.get_double("sim.masses.m0", 0.125);
    c.mass_count = static_cast<int>(config.get_int("sim.masses.count", 6));
    c.mass_ratio = static_cast<int>(config.get_int("sim.masses.ratio", 2));
    c.levels = static_cast<int>(config.get_int("sim.levels", 2));
    c.q0 = config.get_double("sim.q0", 0.0);
    c.z0 = config.get_double("sim.z0", 0.0);
    c.guard = config.get_double("sim.guard", kDefaultGuard);

    const std::string scheme = config.get_string("sim.scheme", "exp");
    if (scheme == "exp") {
        c.ref_scheme = UnderdampedScheme::Exponential;
        c.level_scheme = PositionScheme::EulerMaruyama;
    } else if (scheme == "em") {
        c.ref_scheme = UnderdampedScheme::EulerMaruyama;
        c.level_scheme = PositionScheme::EulerMaruyama;
    } else if (scheme == "milstein") {
        c.ref_scheme = UnderdampedScheme::Exponential;
        c.level_scheme = PositionScheme::Milstein;
    } else {
        throw ParseError("sim.scheme must be exp, em, or milstein; got '" + scheme + "'");
    }

    const std::string fast = config.get_string("sim.fast_path", "auto");
    if (fast == "auto")
        c.fast_path = FastPath::Auto;
    else if (fast == "off")
        c.fast_path = FastPath::Off;
    else if (fast == "scalar")
        c.fast_path = FastPath::Scalar;
    else if (fast == "const-gamma")
        c.fast_path = FastPath::ConstGamma;
    else
        throw ParseError("sim.fast_path must be auto, off, scalar, or const-gamma");

    const std::string control = config.get_string("sim.control", "min-mass");
    if (control == "off")
        c.control = ControlMode::Off;
    else if (control == "min-mass")
        c.control = ControlMode::MinMass;
    else if (control == "full")
        c.control = ControlMode::Full;
    else
        throw ParseError("sim.control must be off, min-mass, or full");

    c.paths = config.get_int("mc.paths", 100);
    c.seed = static_cast<std::uint64_t>(config.require_string("mc.seed").empty()
                                            ? 0
                                            : config.get_int("mc.seed", 0));
    c.p = config.get_double("error.p", 2.0);
    c.cutoff_r = config.get_double("cutoff.r", 0.0);
    c.delta = config.get_double("cutoff.delta", 1.0);
    c.eps = config.get_double("cutoff.eps", 0.1);
    c.threads = threads;
    return c;
}

}  // namespace smallmass
