#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "swarm_init/cli_app.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Chance-constrained release-schedule design for satellite swarms"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    int threads = 0;

    auto* validate = app.add_subcommand("validate", "check a config and echo derived coefficients");
    validate->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* sweep = app.add_subcommand("sweep", "allowable variance factor over the dt grid");
    sweep->add_option("config", config_path, "experiment config (JSON)")->required();
    sweep->add_option("--out", out_path, "output CSV")->default_val("sweep.csv");
    sweep->add_option("--threads", threads, "worker threads (0 = all cores)")->default_val(0);

    auto* mc = app.add_subcommand("montecarlo", "Monte Carlo validation of one design point");
    mc->add_option("config", config_path, "experiment config (JSON)")->required();
    mc->add_option("--out", out_path, "output directory")->default_val("mc_out");
    mc->add_option("--threads", threads, "worker threads (0 = all cores)")->default_val(0);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : swarm_init::cli::kExitInputError;
    }

    if (*validate) return swarm_init::cli::cmd_validate(config_path, std::cout, std::cerr);
    if (*sweep) return swarm_init::cli::cmd_sweep(config_path, out_path, threads, std::cout, std::cerr);
    return swarm_init::cli::cmd_montecarlo(config_path, out_path, threads, std::cout, std::cerr);
}
