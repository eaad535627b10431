#ifndef SWARM_INIT_CLI_APP_HPP
#define SWARM_INIT_CLI_APP_HPP

// Command implementations behind the swarm-init executable.
// Exit codes: 0 success, 1 analysis gate failed, 2 input error.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <thread>

#include "swarm_init/config.hpp"
#include "swarm_init/errors.hpp"
#include "swarm_init/graph_topology.hpp"
#include "swarm_init/monte_carlo.hpp"
#include "swarm_init/safety_analysis.hpp"

namespace swarm_init::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailed = 1;
inline constexpr int kExitInputError = 2;
inline constexpr const char* kThreadsEnv = "SWARM_INIT_THREADS";

/// SWARM_INIT_THREADS wins over the command-line value; 0 means "all cores".
inline int resolve_threads(int requested) {
    int n = requested;
    if (const char* env = std::getenv(kThreadsEnv); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != nullptr && *end == '\0' && v >= 0 && v <= 4096) n = static_cast<int>(v);
    }
    if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return n;
}

/// 12 significant digits, C locale.
inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("--out", "cannot write " + path.string());
    out << content;
}

inline std::string config_comment(const config::ExperimentConfig& c) {
    return "# config: " + config::to_json(c).dump() + "\n";
}

inline json nominal_echo(const safety::DesignProblem& p, double dt) {
    const auto rel = safety::release_policy_nominal(p.policy, p.model, p.satellite, dt);
    return {{"dt_s", dt},
            {"release_speed_m_s", rel.dv},
            {"nu_rad_s", rel.spin_rate},
            {"phase_rad", rel.phase},
            {"C1_m", rel.base.C1p},
            {"C4_m", rel.base.C4p},
            {"C1_air_m", rel.increments.C1_air},
            {"C4_air_m_s", rel.increments.C4_air},
            {"C1p_corrected_m", rel.corrected.C1p},
            {"C4p_corrected_m", rel.corrected.C4p}};
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const json::exception& e) {
        err << "error: ConfigError: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}

inline int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = config::load_config(config_path);
        const auto prob = config::design_problem(cfg);
        const auto& m = prob.model;
        json nominal = json::array();
        for (double dt : cfg.deployment.dt_grid) nominal.push_back(nominal_echo(prob, dt));
        const json echo = {{"s_J2", m.s_J2},
                           {"c_plus", m.c_plus},
                           {"c_minus", m.c_minus},
                           {"mean_motion_rad_s", m.mean_motion},
                           {"omega_xy_rad_s", m.omega_xy},
                           {"epsilon_2_rad_s", m.epsilon_2},
                           {"k_0_s", m.k_0},
                           {"k_air", safety::resolved_k_air(prob.satellite, m)},
                           {"consensus_rate_1_s", prob.consensus.rate()},
                           {"chi2_quantile", prob.safety.chi2},
                           {"nominal", nominal}};
        out << echo.dump(2) << "\n";
        return kExitOk;
    });
}

inline int cmd_sweep(const std::string& config_path, const std::string& out_path, int threads,
                     std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = config::load_config(config_path);
        const auto prob = config::design_problem(cfg);
        const int n_max = *std::max_element(cfg.deployment.N.begin(), cfg.deployment.N.end());
        const auto ladder = graph::build_row_ladder(n_max);
        const auto rows = safety::sweep_interval(cfg.deployment.N, cfg.deployment.dt_grid, prob, ladder,
                                                 resolve_threads(threads), cfg.sweep.search_tol);

        std::string csv = config_comment(cfg);
        csv += "dt_s,N,allowable_factor,worst_stage,mean_budget_Akmu_m,mean_budget_Bkmu_m,diagnostic\n";
        for (const auto& r : rows) {
            csv += fmt(r.dt) + "," + std::to_string(r.N) + "," + fmt(r.result.factor) + "," +
                   std::to_string(r.result.worst_stage) + "," + fmt(r.result.budget_anchor) + "," +
                   fmt(r.result.budget_injected) + "," + r.result.diagnostic + "\n";
        }
        const std::filesystem::path path(out_path);
        write_file(path, csv);
        auto topo = path;
        topo.replace_filename(path.stem().string() + "_topology.json");
        write_file(topo, graph::topology_json(ladder).dump(1) + "\n");
        log << "wrote " << rows.size() << " rows to " << path.string() << "\n";
        return kExitOk;
    });
}

inline int cmd_montecarlo(const std::string& config_path, const std::string& out_dir, int threads,
                          std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = config::load_config(config_path);
        if (cfg.deployment.N.size() != 1) throw ConfigError("deployment.N", "montecarlo needs a single N");
        if (cfg.deployment.dt_grid.size() != 1) {
            throw ConfigError("deployment.dt", "montecarlo needs a single dt");
        }
        montecarlo::TrialConfig tc;
        tc.problem = config::design_problem(cfg);
        tc.N = cfg.deployment.N.front();
        tc.dt = cfg.deployment.dt_grid.front();
        tc.factor = cfg.deployment.variance_factor;
        tc.n_trials = cfg.mc.n_trials;
        tc.master_seed = cfg.mc.seed;
        tc.worst_q = cfg.mc.worst_q;
        tc.trace_step = cfg.mc.trace_step;
        tc.sample_phase = cfg.mc.sample_phase;
        tc.threads = resolve_threads(threads);
        const auto rep = montecarlo::run_trials(tc);

        const auto ladder = graph::build_row_ladder(tc.N);
        const auto analytic = safety::max_allowable_factor(tc.N, tc.dt, tc.problem, ladder,
                                                           cfg.sweep.search_tol);
        const bool gate = rep.empirical_rate <= cfg.beta;

        const json summary = {{"failures", rep.failures},
                              {"n_trials", rep.n_trials},
                              {"empirical_rate", rep.empirical_rate},
                              {"beta", cfg.beta},
                              {"gate_pass", gate},
                              {"N", tc.N},
                              {"dt_s", tc.dt},
                              {"variance_factor", tc.factor},
                              {"analytic_allowable_factor", analytic.factor},
                              {"analytic_worst_stage", analytic.worst_stage},
                              {"analytic_pass", tc.factor <= analytic.factor},
                              {"config", config::to_json(cfg)}};
        std::string csv = config_comment(cfg);
        csv += "time_s,worst_trial_distance_m,mean_worstq_distance_m\n";
        for (std::size_t i = 0; i < rep.times.size(); ++i) {
            csv += fmt(rep.times[i]) + "," + fmt(rep.worst_envelope[i]) + "," + fmt(rep.worst_mean[i]) + "\n";
        }
        const std::filesystem::path dir(out_dir);
        write_file(dir / "summary.json", summary.dump(2) + "\n");
        write_file(dir / "trace.csv", csv);
        write_file(dir / "topology.json", graph::topology_json(ladder).dump(1) + "\n");
        log << rep.failures << " failures in " << rep.n_trials << " trials (rate "
            << fmt(rep.empirical_rate) << ", beta " << fmt(cfg.beta) << ")\n";
        return gate ? kExitOk : kExitGateFailed;
    });
}

}  // namespace swarm_init::cli

#endif  // SWARM_INIT_CLI_APP_HPP
