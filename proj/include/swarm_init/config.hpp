#ifndef SWARM_INIT_CONFIG_HPP
#define SWARM_INIT_CONFIG_HPP

// Experiment configuration: one JSON document, validated field by field.
// Every error names the offending key as a dotted path.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "swarm_init/errors.hpp"
#include "swarm_init/orbit_core.hpp"
#include "swarm_init/safety_analysis.hpp"
#include "swarm_init/stage_propagation.hpp"

namespace swarm_init::config {

using nlohmann::json;

struct OrbitBlock {
    double mu = 3.99e14;      // [m^3/s^2]
    double R_e = 6.37e6;      // [m]
    double h = 4.0e5;         // [m]
    double i0_deg = 51.7;
    double J2 = orbit::kEarthJ2;
    std::optional<double> k_J2;  // [m^5/s^2], overrides J2
    double rho = 1.18e-12;    // [kg/m^3]
    double C_d = 2.0;
    std::optional<double> A_over_m;  // [m^2/kg], checked against ell^2/m
    double m = 1.0;           // [kg]
    double ell = 0.10;        // [m]
    double d_off = 0.01;      // [m]
};

struct DeploymentBlock {
    std::vector<int> N{100};
    std::vector<double> dt_grid{4.0};  // [s]
    safety::ReleaseMode policy = safety::ReleaseMode::fixed_velocity;
    double xdot = 0.001;   // [m/s]
    double ydot = 0.001;   // [m/s]
    double dT_ref = 4.0;   // [s]
    double variance_factor = 0.025;
    safety::PhaseRule phase_rule = safety::PhaseRule::zero;
    double phase = 0.0;    // [rad]
    propagation::FreeDriftTiming timing;
};

struct DragBlock {
    int M_trunc = 5;
    std::optional<double> k_air;
    double resonance_tol = drag::kDefaultResonanceTol;
};

struct McBlock {
    int n_trials = 1000;
    std::uint64_t seed = 1;
    int worst_q = 100;
    double trace_step = 1.0;
    bool sample_phase = true;
};

struct SweepBlock {
    double search_tol = safety::kSearchTol;
};

struct ExperimentConfig {
    OrbitBlock orbit;
    double k_A = 200.0;
    double r_c = 1.0;
    double beta = 0.01;
    DeploymentBlock deployment;
    DragBlock drag;
    McBlock mc;
    SweepBlock sweep;
};

namespace detail {

inline const json& require_object(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError(key, "missing block");
    const auto& v = j.at(key);
    if (!v.is_object()) throw ConfigError(key, "expected an object");
    return v;
}

inline void reject_unknown(const json& obj, const std::string& prefix,
                           std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(prefix + it.key(), "unknown key");
    }
}

inline double number(const json& obj, const std::string& prefix, const char* key, double fallback,
                     bool required = false) {
    if (!obj.contains(key)) {
        if (required) throw ConfigError(prefix + key, "missing");
        return fallback;
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(prefix + key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(prefix + key, "must be finite");
    return x;
}

inline double positive(const json& obj, const std::string& prefix, const char* key, double fallback,
                       bool required = false) {
    const double x = number(obj, prefix, key, fallback, required);
    if (!(x > 0.0)) throw ConfigError(prefix + key, "must be positive");
    return x;
}

inline int integer(const json& obj, const std::string& prefix, const char* key, int fallback,
                   int min_value) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(prefix + key, "expected an integer");
    const auto x = v.get<long long>();
    if (x < min_value || x > 1000000) {
        throw ConfigError(prefix + key, "must be at least " + std::to_string(min_value));
    }
    return static_cast<int>(x);
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& root) {
    using namespace detail;
    if (!root.is_object()) throw ConfigError("<root>", "expected a JSON object");
    reject_unknown(root, "", {"orbit", "consensus", "safety", "deployment", "drag", "mc", "sweep"});
    ExperimentConfig c;

    {
        const auto& o = require_object(root, "orbit");
        const std::string p = "orbit.";
        reject_unknown(o, p, {"mu", "R_e", "h", "i0_deg", "J2", "k_J2", "rho", "C_d", "A_over_m", "m",
                              "ell", "d_off"});
        auto& b = c.orbit;
        b.mu = positive(o, p, "mu", b.mu, true);
        b.R_e = positive(o, p, "R_e", b.R_e, true);
        b.h = positive(o, p, "h", b.h, true);
        b.i0_deg = number(o, p, "i0_deg", b.i0_deg, true);
        if (b.i0_deg < 0.0 || b.i0_deg > 180.0) throw ConfigError(p + "i0_deg", "must lie in [0, 180]");
        b.J2 = number(o, p, "J2", b.J2);
        if (o.contains("k_J2")) b.k_J2 = number(o, p, "k_J2", 0.0);
        b.rho = positive(o, p, "rho", b.rho, true);
        b.C_d = positive(o, p, "C_d", b.C_d, true);
        b.m = positive(o, p, "m", b.m, true);
        b.ell = positive(o, p, "ell", b.ell, true);
        b.d_off = positive(o, p, "d_off", b.d_off);
        if (o.contains("A_over_m")) {
            b.A_over_m = positive(o, p, "A_over_m", 0.0);
            const double implied = b.ell * b.ell / b.m;
            if (std::abs(*b.A_over_m - implied) > 1e-6 * implied) {
                throw ConfigError(p + "A_over_m", "inconsistent with ell^2 / m = " + std::to_string(implied));
            }
        }
    }
    {
        const auto& o = require_object(root, "consensus");
        reject_unknown(o, "consensus.", {"k_A"});
        c.k_A = positive(o, "consensus.", "k_A", c.k_A, true);
    }
    {
        const auto& o = require_object(root, "safety");
        reject_unknown(o, "safety.", {"r_c", "beta"});
        c.r_c = positive(o, "safety.", "r_c", c.r_c, true);
        c.beta = number(o, "safety.", "beta", c.beta, true);
        if (!(c.beta > 0.0 && c.beta < 1.0)) throw ConfigError("safety.beta", "must lie in (0, 1)");
    }
    {
        const auto& o = require_object(root, "deployment");
        const std::string p = "deployment.";
        reject_unknown(o, p, {"N", "dt", "dt_grid", "policy", "xdot", "ydot", "dT_ref", "variance_factor",
                              "nominal_phase", "timing"});
        auto& d = c.deployment;
        if (!o.contains("N")) throw ConfigError(p + "N", "missing");
        const auto& n = o.at("N");
        d.N.clear();
        if (n.is_number_integer()) {
            d.N.push_back(n.get<int>());
        } else if (n.is_array()) {
            for (const auto& x : n) {
                if (!x.is_number_integer()) throw ConfigError(p + "N", "expected integers");
                d.N.push_back(x.get<int>());
            }
        } else {
            throw ConfigError(p + "N", "expected an integer or a list of integers");
        }
        if (d.N.empty()) throw ConfigError(p + "N", "empty list");
        for (int v : d.N) {
            if (v < 1 || v > 10000) throw ConfigError(p + "N", "each value must lie in [1, 10000]");
        }

        if (o.contains("dt") == o.contains("dt_grid")) {
            throw ConfigError(p + "dt", "give exactly one of dt and dt_grid");
        }
        d.dt_grid.clear();
        if (o.contains("dt")) {
            d.dt_grid.push_back(positive(o, p, "dt", 0.0, true));
        } else {
            const auto& g = o.at("dt_grid");
            if (!g.is_array()) throw ConfigError(p + "dt_grid", "expected a list of numbers");
            if (g.empty()) throw ConfigError(p + "dt_grid", "empty grid");
            for (const auto& x : g) {
                if (!x.is_number() || !(x.get<double>() > 0.0) || !std::isfinite(x.get<double>())) {
                    throw ConfigError(p + "dt_grid", "entries must be positive numbers");
                }
                if (!d.dt_grid.empty() && !(x.get<double>() > d.dt_grid.back())) {
                    throw ConfigError(p + "dt_grid", "must be strictly ascending");
                }
                d.dt_grid.push_back(x.get<double>());
            }
        }

        const std::string mode = o.value("policy", std::string("fixed_velocity"));
        if (mode == "fixed_velocity") {
            d.policy = safety::ReleaseMode::fixed_velocity;
        } else if (mode == "drift_matched") {
            d.policy = safety::ReleaseMode::drift_matched;
        } else {
            throw ConfigError(p + "policy", "expected fixed_velocity or drift_matched");
        }
        d.xdot = number(o, p, "xdot", d.xdot);
        d.ydot = number(o, p, "ydot", d.ydot);
        if (d.xdot == 0.0 && d.ydot == 0.0) throw ConfigError(p + "xdot", "release velocity is zero");
        d.dT_ref = positive(o, p, "dT_ref", d.dT_ref);
        d.variance_factor = number(o, p, "variance_factor", d.variance_factor);
        if (d.variance_factor < 0.0) throw ConfigError(p + "variance_factor", "must be non-negative");

        if (o.contains("nominal_phase")) {
            const auto& ph = o.at("nominal_phase");
            if (ph.is_number()) {
                d.phase_rule = safety::PhaseRule::fixed;
                d.phase = ph.get<double>();
            } else if (ph == "zero") {
                d.phase_rule = safety::PhaseRule::zero;
            } else if (ph == "worst_case") {
                d.phase_rule = safety::PhaseRule::worst_case;
            } else {
                throw ConfigError(p + "nominal_phase", "expected \"zero\", \"worst_case\" or a number");
            }
        }
        if (o.contains("timing")) {
            const auto& t = o.at("timing");
            if (!t.is_object()) throw ConfigError(p + "timing", "expected an object");
            reject_unknown(t, p + "timing.", {"leading", "trailing"});
            d.timing.leading = number(t, p + "timing.", "leading", d.timing.leading);
            d.timing.trailing = number(t, p + "timing.", "trailing", d.timing.trailing);
            if (d.timing.leading < 1.0 || d.timing.trailing < 1.0) {
                throw ConfigError(p + "timing", "free-drift multiples must be at least 1");
            }
        }
    }
    if (root.contains("drag")) {
        const auto& o = require_object(root, "drag");
        reject_unknown(o, "drag.", {"M_trunc", "k_air", "resonance_tol"});
        c.drag.M_trunc = integer(o, "drag.", "M_trunc", c.drag.M_trunc, 1);
        if (o.contains("k_air")) c.drag.k_air = number(o, "drag.", "k_air", 0.0);
        if (c.drag.k_air && *c.drag.k_air < 0.0) throw ConfigError("drag.k_air", "must be non-negative");
        c.drag.resonance_tol = positive(o, "drag.", "resonance_tol", c.drag.resonance_tol);
    }
    if (root.contains("mc")) {
        const auto& o = require_object(root, "mc");
        reject_unknown(o, "mc.", {"n_trials", "seed", "worst_q", "trace_step", "sample_phase"});
        c.mc.n_trials = integer(o, "mc.", "n_trials", c.mc.n_trials, 1);
        if (o.contains("seed")) {
            if (!o.at("seed").is_number_unsigned()) throw ConfigError("mc.seed", "expected a non-negative integer");
            c.mc.seed = o.at("seed").get<std::uint64_t>();
        }
        c.mc.worst_q = integer(o, "mc.", "worst_q", c.mc.worst_q, 1);
        c.mc.trace_step = positive(o, "mc.", "trace_step", c.mc.trace_step);
        if (o.contains("sample_phase")) {
            if (!o.at("sample_phase").is_boolean()) throw ConfigError("mc.sample_phase", "expected a boolean");
            c.mc.sample_phase = o.at("sample_phase").get<bool>();
        }
    }
    if (root.contains("sweep")) {
        const auto& o = require_object(root, "sweep");
        reject_unknown(o, "sweep.", {"search_tol"});
        c.sweep.search_tol = positive(o, "sweep.", "search_tol", c.sweep.search_tol);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(root);
}

/// Fully resolved configuration, defaults included.
inline json to_json(const ExperimentConfig& c) {
    json orbit = {{"mu", c.orbit.mu},   {"R_e", c.orbit.R_e}, {"h", c.orbit.h},
                  {"i0_deg", c.orbit.i0_deg}, {"J2", c.orbit.J2}, {"rho", c.orbit.rho},
                  {"C_d", c.orbit.C_d}, {"m", c.orbit.m},     {"ell", c.orbit.ell},
                  {"d_off", c.orbit.d_off}};
    if (c.orbit.k_J2) orbit["k_J2"] = *c.orbit.k_J2;
    if (c.orbit.A_over_m) orbit["A_over_m"] = *c.orbit.A_over_m;

    const auto& d = c.deployment;
    json phase;
    switch (d.phase_rule) {
        case safety::PhaseRule::zero: phase = "zero"; break;
        case safety::PhaseRule::worst_case: phase = "worst_case"; break;
        case safety::PhaseRule::fixed: phase = d.phase; break;
    }
    json deployment = {{"N", d.N},
                       {"dt_grid", d.dt_grid},
                       {"policy", d.policy == safety::ReleaseMode::fixed_velocity ? "fixed_velocity"
                                                                                  : "drift_matched"},
                       {"xdot", d.xdot},
                       {"ydot", d.ydot},
                       {"dT_ref", d.dT_ref},
                       {"variance_factor", d.variance_factor},
                       {"nominal_phase", phase},
                       {"timing", {{"leading", d.timing.leading}, {"trailing", d.timing.trailing}}}};
    json drag = {{"M_trunc", c.drag.M_trunc}, {"resonance_tol", c.drag.resonance_tol}};
    if (c.drag.k_air) drag["k_air"] = *c.drag.k_air;
    return {{"orbit", orbit},
            {"consensus", {{"k_A", c.k_A}}},
            {"safety", {{"r_c", c.r_c}, {"beta", c.beta}}},
            {"deployment", deployment},
            {"drag", drag},
            {"mc",
             {{"n_trials", c.mc.n_trials},
              {"seed", c.mc.seed},
              {"worst_q", c.mc.worst_q},
              {"trace_step", c.mc.trace_step},
              {"sample_phase", c.mc.sample_phase}}},
            {"sweep", {{"search_tol", c.sweep.search_tol}}}};
}

inline orbit::OrbitModel orbit_model(const ExperimentConfig& c) {
    const auto& o = c.orbit;
    const double kj2 = o.k_J2 ? *o.k_J2 : orbit::k_J2_from_zonal(o.J2, o.mu, o.R_e);
    return orbit::derive_coefficients(o.mu, o.R_e + o.h, o.i0_deg * M_PI / 180.0, kj2);
}

inline safety::DesignProblem design_problem(const ExperimentConfig& c) {
    safety::DesignProblem p;
    p.model = orbit_model(c);
    p.consensus = propagation::make_consensus(c.k_A, p.model);
    p.safety = safety::make_safety_config(c.r_c, c.beta);
    const auto& d = c.deployment;
    p.policy = {d.policy, d.xdot, d.ydot, d.dT_ref, d.phase_rule, d.phase};
    p.satellite.rho = c.orbit.rho;
    p.satellite.C_d = c.orbit.C_d;
    p.satellite.mass = c.orbit.m;
    p.satellite.ell = c.orbit.ell;
    p.satellite.d_off = c.orbit.d_off;
    p.satellite.M_trunc = c.drag.M_trunc;
    p.satellite.k_air = c.drag.k_air;
    p.satellite.resonance_tol = c.drag.resonance_tol;
    p.timing = d.timing;
    return p;
}

}  // namespace swarm_init::config

#endif  // SWARM_INIT_CONFIG_HPP
