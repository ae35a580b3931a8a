#pragma once

// Experiment configuration: strict JSON parsing into typed config structs.
// Every field is validated before any computation runs, unknown keys are
// rejected, and error messages name the offending field by its dotted path.

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdsim/born.hpp"
#include "rdsim/noise.hpp"
#include "rdsim/pendulum.hpp"
#include "rdsim/spin_chain.hpp"

namespace rdsim {

using json = nlohmann::ordered_json;

// Validation failure carrying a user-facing message that names the field.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ExperimentKind { pendulum, spinchain, born };

inline std::string kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::pendulum: return "pendulum";
        case ExperimentKind::spinchain: return "spinchain";
        default: return "born";
    }
}

struct OutputSpec {
    std::string path;            // empty means stdout
    std::string format = "json"; // json | csv
};

struct PendulumConfig {
    double delta = 0.0;
    NoiseDistribution noise = NoiseDistribution::gaussian(0.0, 1.0);
    std::uint64_t n_trials = 100000;
    double dt = 1e-3;
    double t_max = 60.0;
    TrialMode mode = TrialMode::energy;
};

struct SpinChainConfig {
    ChainSpec chain;
    std::vector<double> field_grid; // symmetry-breaking probe fields along z
};

// Known born check names; parsing rejects anything else.
inline const std::vector<std::string>& born_check_names() {
    static const std::vector<std::string> names = {"equal_counts", "symmetry_rule", "phase_pair",
                                                   "flip", "fine_grain"};
    return names;
}

struct BornConfig {
    std::size_t labels = 2;
    ChainSpec chain{4, -1, Boundary::open};
    std::size_t ensemble_size = 64;
    std::vector<cplx> amplitudes;
    std::vector<std::string> checks;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::pendulum;
    std::uint64_t seed = 0;
    OutputSpec output;
    PendulumConfig pendulum;
    SpinChainConfig spinchain;
    BornConfig born;
};

namespace detail {

[[noreturn]] inline void cfg_fail(const std::string& field, const std::string& what) {
    throw ConfigError("config error: " + field + ": " + what);
}

inline void reject_unknown_keys(const json& obj, const std::string& scope,
                                std::initializer_list<const char*> known) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : known)
            if (item.key() == k) ok = true;
        if (!ok) cfg_fail(scope.empty() ? item.key() : scope + "." + item.key(), "unknown field");
    }
}

inline const json& require_field(const json& obj, const std::string& scope, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end())
        cfg_fail(scope.empty() ? key : scope + "." + key, "required field is missing");
    return *it;
}

inline std::string join_path(const std::string& scope, const char* key) {
    return scope.empty() ? key : scope + "." + key;
}

inline double as_number(const json& v, const std::string& field) {
    if (!v.is_number()) cfg_fail(field, "expected a number");
    return v.get<double>();
}

inline double finite_number(const json& v, const std::string& field) {
    const double x = as_number(v, field);
    if (!std::isfinite(x)) cfg_fail(field, "must be finite");
    return x;
}

inline std::uint64_t positive_count(const json& v, const std::string& field,
                                    std::uint64_t max_value) {
    if (!v.is_number_integer()) cfg_fail(field, "expected a positive integer");
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() <= 0)
        cfg_fail(field, "must be positive");
    const std::uint64_t n = v.get<std::uint64_t>();
    if (n == 0) cfg_fail(field, "must be positive");
    if (n > max_value) cfg_fail(field, "must be at most " + std::to_string(max_value));
    return n;
}

inline std::string as_string(const json& v, const std::string& field) {
    if (!v.is_string()) cfg_fail(field, "expected a string");
    return v.get<std::string>();
}

inline NoiseDistribution parse_noise(const json& obj, const std::string& scope) {
    if (!obj.is_object()) cfg_fail(scope, "expected an object");
    const std::string kind = as_string(require_field(obj, scope, "kind"), join_path(scope, "kind"));
    if (kind == "gaussian") {
        reject_unknown_keys(obj, scope, {"kind", "mean", "stddev"});
        const double mean = finite_number(require_field(obj, scope, "mean"), join_path(scope, "mean"));
        const double sd =
            finite_number(require_field(obj, scope, "stddev"), join_path(scope, "stddev"));
        if (!(sd > 0.0)) cfg_fail(join_path(scope, "stddev"), "must be > 0");
        return NoiseDistribution::gaussian(mean, sd);
    }
    if (kind == "uniform") {
        reject_unknown_keys(obj, scope, {"kind", "lo", "hi"});
        const double lo = finite_number(require_field(obj, scope, "lo"), join_path(scope, "lo"));
        const double hi = finite_number(require_field(obj, scope, "hi"), join_path(scope, "hi"));
        if (!(lo < hi)) cfg_fail(join_path(scope, "hi"), "must exceed lo");
        return NoiseDistribution::uniform(lo, hi);
    }
    if (kind == "tabulated") {
        reject_unknown_keys(obj, scope, {"kind", "grid", "density"});
        const json& jg = require_field(obj, scope, "grid");
        const json& jd = require_field(obj, scope, "density");
        if (!jg.is_array() || !jd.is_array()) cfg_fail(scope, "grid and density must be arrays");
        std::vector<double> grid, density;
        for (std::size_t i = 0; i < jg.size(); ++i)
            grid.push_back(finite_number(jg[i], join_path(scope, "grid")));
        for (std::size_t i = 0; i < jd.size(); ++i)
            density.push_back(finite_number(jd[i], join_path(scope, "density")));
        try {
            return NoiseDistribution::tabulated(std::move(grid), std::move(density));
        } catch (const std::exception& e) {
            cfg_fail(scope, e.what());
        }
    }
    cfg_fail(join_path(scope, "kind"), "must be gaussian, uniform, or tabulated");
}

inline ChainSpec parse_chain(const json& obj, const std::string& scope) {
    if (!obj.is_object()) cfg_fail(scope, "expected an object");
    reject_unknown_keys(obj, scope, {"sites", "sign", "boundary"});
    ChainSpec spec;
    spec.n_sites = static_cast<std::size_t>(
        positive_count(require_field(obj, scope, "sites"), join_path(scope, "sites"), 12));
    if (spec.n_sites < 2) cfg_fail(join_path(scope, "sites"), "need at least 2 sites");
    const std::string sign =
        as_string(require_field(obj, scope, "sign"), join_path(scope, "sign"));
    if (sign == "ferromagnetic")
        spec.coupling_sign = -1;
    else if (sign == "antiferromagnetic")
        spec.coupling_sign = +1;
    else
        cfg_fail(join_path(scope, "sign"), "must be ferromagnetic or antiferromagnetic");
    const std::string boundary =
        as_string(require_field(obj, scope, "boundary"), join_path(scope, "boundary"));
    if (boundary == "open")
        spec.boundary = Boundary::open;
    else if (boundary == "periodic")
        spec.boundary = Boundary::periodic;
    else
        cfg_fail(join_path(scope, "boundary"), "must be open or periodic");
    return spec;
}

inline PendulumConfig parse_pendulum(const json& obj) {
    const std::string scope = "parameters";
    reject_unknown_keys(obj, scope, {"delta", "noise", "n_trials", "dt", "t_max", "mode"});
    PendulumConfig p;
    if (obj.contains("delta"))
        p.delta = finite_number(obj["delta"], "parameters.delta");
    if (obj.contains("noise")) p.noise = parse_noise(obj["noise"], "parameters.noise");
    if (obj.contains("n_trials"))
        p.n_trials = positive_count(obj["n_trials"], "parameters.n_trials", 100000000);
    if (obj.contains("dt")) {
        p.dt = finite_number(obj["dt"], "parameters.dt");
        if (!(p.dt > 0.0)) cfg_fail("parameters.dt", "must be > 0");
    }
    if (obj.contains("t_max")) {
        p.t_max = finite_number(obj["t_max"], "parameters.t_max");
        if (!(p.t_max > 0.0)) cfg_fail("parameters.t_max", "must be > 0");
    }
    if (obj.contains("mode")) {
        const std::string mode = as_string(obj["mode"], "parameters.mode");
        if (mode == "energy")
            p.mode = TrialMode::energy;
        else if (mode == "dynamics")
            p.mode = TrialMode::dynamics;
        else
            cfg_fail("parameters.mode", "must be energy or dynamics");
    }
    return p;
}

inline SpinChainConfig parse_spinchain(const json& obj) {
    const std::string scope = "parameters";
    reject_unknown_keys(obj, scope, {"sites", "sign", "boundary", "field_grid"});
    json chain_obj = json::object();
    chain_obj["sites"] = require_field(obj, scope, "sites");
    chain_obj["sign"] = require_field(obj, scope, "sign");
    chain_obj["boundary"] = require_field(obj, scope, "boundary");
    SpinChainConfig s;
    s.chain = parse_chain(chain_obj, scope);
    if (s.chain.n_sites > 8)
        cfg_fail("parameters.sites", "must be at most 8 for the dense spectrum scan");
    if (obj.contains("field_grid")) {
        const json& grid = obj["field_grid"];
        if (!grid.is_array()) cfg_fail("parameters.field_grid", "expected an array of numbers");
        for (std::size_t i = 0; i < grid.size(); ++i)
            s.field_grid.push_back(finite_number(grid[i], "parameters.field_grid"));
    }
    if (!s.field_grid.empty() && s.chain.coupling_sign != -1)
        cfg_fail("parameters.field_grid",
                 "the sensitivity scan requires the ferromagnetic sign");
    return s;
}

inline cplx parse_amplitude(const json& v, const std::string& field) {
    if (v.is_number()) return cplx(finite_number(v, field), 0.0);
    if (v.is_array() && v.size() == 2)
        return cplx(finite_number(v[0], field), finite_number(v[1], field));
    cfg_fail(field, "expected a number or an [re, im] pair");
}

inline BornConfig parse_born(const json& obj) {
    const std::string scope = "parameters";
    reject_unknown_keys(obj, scope,
                        {"labels", "chain", "ensemble_size", "amplitudes", "checks"});
    BornConfig b;
    b.labels = static_cast<std::size_t>(
        positive_count(require_field(obj, scope, "labels"), "parameters.labels", 4));
    if (b.labels < 2) cfg_fail("parameters.labels", "must be between 2 and 4");
    b.chain = parse_chain(require_field(obj, scope, "chain"), "parameters.chain");
    if (b.chain.n_sites != 4 || b.chain.coupling_sign != -1 || b.chain.boundary != Boundary::open)
        cfg_fail("parameters.chain",
                 "the apparatus must be the 4-site open ferromagnetic chain");
    b.ensemble_size = static_cast<std::size_t>(positive_count(
        require_field(obj, scope, "ensemble_size"), "parameters.ensemble_size", 1u << 20));
    std::size_t dial = 2, power = 0;
    for (; dial <= b.ensemble_size; ++dial) {
        power = 1;
        for (std::size_t i = 0; i < b.labels && power <= b.ensemble_size; ++i) power *= dial;
        if (power >= b.ensemble_size) break;
    }
    if (power != b.ensemble_size)
        cfg_fail("parameters.ensemble_size",
                 "must be K^labels for an integer dial count K >= 2");
    if (b.ensemble_size % b.labels != 0)
        cfg_fail("parameters.ensemble_size", "must be divisible by the label count");
    const json& amps = require_field(obj, scope, "amplitudes");
    if (!amps.is_array() || amps.size() != b.labels)
        cfg_fail("parameters.amplitudes",
                 "expected an array with one amplitude per label (" +
                     std::to_string(b.labels) + ")");
    double norm = 0.0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
        b.amplitudes.push_back(parse_amplitude(amps[i], "parameters.amplitudes"));
        norm += std::norm(b.amplitudes.back());
    }
    if (std::abs(norm - 1.0) > tol::prob_sum)
        cfg_fail("parameters.amplitudes",
                 "squared magnitudes must sum to 1 (got " + std::to_string(norm) + ")");
    const json& checks = require_field(obj, scope, "checks");
    if (!checks.is_array()) cfg_fail("parameters.checks", "expected an array of check names");
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const std::string name = as_string(checks[i], "parameters.checks");
        bool known = false;
        for (const std::string& k : born_check_names())
            if (k == name) known = true;
        if (!known) cfg_fail("parameters.checks", "unknown check \"" + name + "\"");
        for (const std::string& seen : b.checks)
            if (seen == name) cfg_fail("parameters.checks", "duplicate check \"" + name + "\"");
        if (name == "flip" && b.labels != 2)
            cfg_fail("parameters.checks", "flip applies to two-label models only");
        b.checks.push_back(name);
    }
    return b;
}

inline OutputSpec parse_output(const json& obj) {
    const std::string scope = "output";
    if (!obj.is_object()) cfg_fail(scope, "expected an object");
    reject_unknown_keys(obj, scope, {"path", "format"});
    OutputSpec out;
    if (obj.contains("path")) out.path = as_string(obj["path"], "output.path");
    if (obj.contains("format")) {
        out.format = as_string(obj["format"], "output.format");
        if (out.format != "json" && out.format != "csv")
            cfg_fail("output.format", "must be json or csv");
    }
    return out;
}

}  // namespace detail

// Parses and fully validates one experiment description. Throws ConfigError
// with a message naming the offending field on any problem.
inline ExperimentConfig parse_config(const json& root) {
    using namespace detail;
    if (!root.is_object()) throw ConfigError("config error: top level must be a JSON object");
    reject_unknown_keys(root, "", {"kind", "seed", "parameters", "output"});
    ExperimentConfig cfg;
    const std::string kind = as_string(require_field(root, "", "kind"), "kind");
    if (kind == "pendulum")
        cfg.kind = ExperimentKind::pendulum;
    else if (kind == "spinchain")
        cfg.kind = ExperimentKind::spinchain;
    else if (kind == "born")
        cfg.kind = ExperimentKind::born;
    else
        cfg_fail("kind", "must be pendulum, spinchain, or born");
    if (root.contains("seed")) {
        const json& s = root["seed"];
        if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
            cfg_fail("seed", "expected a non-negative integer");
        cfg.seed = s.get<std::uint64_t>();
    }
    const json& params = require_field(root, "", "parameters");
    if (!params.is_object()) cfg_fail("parameters", "expected an object");
    switch (cfg.kind) {
        case ExperimentKind::pendulum: cfg.pendulum = parse_pendulum(params); break;
        case ExperimentKind::spinchain: cfg.spinchain = parse_spinchain(params); break;
        case ExperimentKind::born: cfg.born = parse_born(params); break;
    }
    if (root.contains("output")) cfg.output = detail::parse_output(root["output"]);
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config error: invalid JSON: ") + e.what());
    }
    return parse_config(root);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config error: cannot open file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace detail {

inline json noise_to_json(const NoiseDistribution& noise) {
    json j = json::object();
    switch (noise.kind) {
        case NoiseKind::gaussian:
            j["kind"] = "gaussian";
            j["mean"] = noise.mu;
            j["stddev"] = noise.sigma;
            break;
        case NoiseKind::uniform:
            j["kind"] = "uniform";
            j["lo"] = noise.lo;
            j["hi"] = noise.hi;
            break;
        case NoiseKind::tabulated:
            j["kind"] = "tabulated";
            j["grid"] = noise.xs;
            j["density"] = noise.fs; // normalized form; reparsing is idempotent
            break;
    }
    return j;
}

inline json chain_to_json(const ChainSpec& spec) {
    json j = json::object();
    j["sites"] = spec.n_sites;
    j["sign"] = spec.coupling_sign == -1 ? "ferromagnetic" : "antiferromagnetic";
    j["boundary"] = spec.boundary == Boundary::open ? "open" : "periodic";
    return j;
}

}  // namespace detail

// Canonical serialization: defaults are materialized, so the echo embedded in
// a report is itself a complete, reparsable config that reruns identically.
inline json config_to_json(const ExperimentConfig& cfg) {
    json root = json::object();
    root["kind"] = kind_name(cfg.kind);
    root["seed"] = cfg.seed;
    json params = json::object();
    switch (cfg.kind) {
        case ExperimentKind::pendulum: {
            const PendulumConfig& p = cfg.pendulum;
            params["delta"] = p.delta;
            params["noise"] = detail::noise_to_json(p.noise);
            params["n_trials"] = p.n_trials;
            params["dt"] = p.dt;
            params["t_max"] = p.t_max;
            params["mode"] = p.mode == TrialMode::energy ? "energy" : "dynamics";
            break;
        }
        case ExperimentKind::spinchain: {
            const SpinChainConfig& s = cfg.spinchain;
            json chain = detail::chain_to_json(s.chain);
            params["sites"] = chain["sites"];
            params["sign"] = chain["sign"];
            params["boundary"] = chain["boundary"];
            params["field_grid"] = s.field_grid;
            break;
        }
        case ExperimentKind::born: {
            const BornConfig& b = cfg.born;
            params["labels"] = b.labels;
            params["chain"] = detail::chain_to_json(b.chain);
            params["ensemble_size"] = b.ensemble_size;
            json amps = json::array();
            for (const cplx& a : b.amplitudes) amps.push_back({a.real(), a.imag()});
            params["amplitudes"] = amps;
            params["checks"] = b.checks;
            break;
        }
    }
    root["parameters"] = params;
    json out = json::object();
    out["path"] = cfg.output.path;
    out["format"] = cfg.output.format;
    root["output"] = out;
    return root;
}

}  // namespace rdsim
