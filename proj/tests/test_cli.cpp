#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "swarm_init/cli_app.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfigs = SWARM_INIT_CONFIG_DIR;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "swarm_init_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json table1() { return json::parse(slurp(kConfigs / "table1.json")); }

fs::path write_config(const std::string& name, const json& j) {
    const auto p = scratch(name);
    std::ofstream(p) << j.dump(2);
    return p;
}

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const auto out = scratch("stdout_" + std::to_string(counter));
    const auto err = scratch("stderr_" + std::to_string(counter++));
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + std::string(SWARM_INIT_EXE) + "\" " +
                            args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, slurp(out), slurp(err)};
}

json small_mc(double factor, double beta) {
    auto j = table1();
    j["deployment"]["N"] = 6;
    j["deployment"]["variance_factor"] = factor;
    j["safety"]["beta"] = beta;
    j["mc"] = {{"n_trials", 200}, {"seed", 5}, {"worst_q", 20}};
    return j;
}

}  // namespace

TEST(Cli, ValidateEchoesCoefficients) {
    const auto r = run("validate \"" + (kConfigs / "table1.json").string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    for (const char* key : {"s_J2", "omega_xy_rad_s", "epsilon_2_rad_s", "k_0_s"}) EXPECT_TRUE(j.contains(key));
    const auto& nom = j.at("nominal").at(0);
    for (const char* key : {"nu_rad_s", "C1_air_m", "C4_air_m_s"}) EXPECT_TRUE(nom.contains(key));
    EXPECT_NEAR(j.at("omega_xy_rad_s").get<double>(), 1.134e-3, 1e-6);
}

TEST(Cli, ShippedConfigsValidate) {
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        const auto r = run("validate \"" + entry.path().string() + "\"");
        EXPECT_EQ(r.code, 0) << entry.path() << ": " << r.err;
    }
}

TEST(Cli, InputErrorsNameTheKey) {
    auto j = table1();
    j.erase("safety");
    auto r = run("validate \"" + write_config("no_safety.json", j).string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("safety"), std::string::npos);

    j = table1();
    j["orbit"]["m"] = -1.0;
    r = run("validate \"" + write_config("neg_mass.json", j).string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("orbit.m"), std::string::npos);

    j = table1();
    j["deployment"].erase("dt");
    j["deployment"]["dt_grid"] = json::array();
    r = run("sweep \"" + write_config("empty_grid.json", j).string() + "\" --out " + scratch("x.csv").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("deployment.dt_grid"), std::string::npos);

    j = table1();
    j["orbit"]["colour"] = "red";
    r = run("validate \"" + write_config("unknown.json", j).string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("orbit.colour"), std::string::npos);

    j = table1();
    j["orbit"]["A_over_m"] = 0.02;
    r = run("validate \"" + write_config("area.json", j).string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("orbit.A_over_m"), std::string::npos);

    r = run("validate \"" + scratch("does_not_exist.json").string() + "\"");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(run("frobnicate x.json").code, 2);
}

TEST(Cli, SweepWritesRowsAndTopology) {
    auto j = table1();
    j["deployment"]["N"] = json::array({3, 6});
    j["deployment"].erase("dt");
    j["deployment"]["dt_grid"] = json::array({2.0, 4.0, 8.0});
    const auto out = scratch("sweep_rows.csv");
    const auto r = run("sweep \"" + write_config("sweep.json", j).string() + "\" --out \"" + out.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(slurp(out));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line.rfind("# config: ", 0), 0u);
    std::getline(csv, line);
    EXPECT_EQ(line, "dt_s,N,allowable_factor,worst_stage,mean_budget_Akmu_m,mean_budget_Bkmu_m,diagnostic");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 6);
    const auto topo = json::parse(slurp(scratch("sweep_rows_topology.json")));
    EXPECT_FALSE(topo.empty());
}

TEST(Cli, InfeasibleNominalGivesZeroRowsWithDiagnostic) {
    auto j = table1();
    j["deployment"]["N"] = 3;
    j["safety"]["r_c"] = 1e-4;
    const auto out = scratch("infeasible.csv");
    const auto r = run("sweep \"" + write_config("infeasible.json", j).string() + "\" --out \"" + out.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(slurp(out).find("\n4,3,0,"), std::string::npos);
    EXPECT_NE(slurp(out).find("nominal_unsafe"), std::string::npos);
}

TEST(Cli, MonteCarloGateAndFiles) {
    const auto ok_cfg = write_config("mc_ok.json", small_mc(0.02, 0.01));
    const auto dir = scratch("mc_ok");
    auto r = run("montecarlo \"" + ok_cfg.string() + "\" --out \"" + dir.string() + "\"");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(summary.at("failures").get<int>(), 0);
    EXPECT_EQ(summary.at("n_trials").get<int>(), 200);
    EXPECT_TRUE(summary.contains("config"));
    EXPECT_NE(slurp(dir / "trace.csv").find("time_s,worst_trial_distance_m,mean_worstq_distance_m"),
              std::string::npos);

    const auto bad_cfg = write_config("mc_bad.json", small_mc(0.8, 1e-9));
    r = run("montecarlo \"" + bad_cfg.string() + "\" --out \"" + scratch("mc_bad").string() + "\"");
    EXPECT_EQ(r.code, 1);
}

TEST(Cli, OutputsAreByteIdenticalAcrossRunsAndThreads) {
    const auto cfg = write_config("mc_repeat.json", small_mc(0.05, 0.01));
    const auto a = scratch("mc_a"), b = scratch("mc_b");
    ASSERT_EQ(run("montecarlo \"" + cfg.string() + "\" --out \"" + a.string() + "\" --threads 1").code, 0);
    ASSERT_EQ(run("montecarlo \"" + cfg.string() + "\" --out \"" + b.string() + "\"", "SWARM_INIT_THREADS=3").code, 0);
    for (const char* f : {"summary.json", "trace.csv", "topology.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }

    const auto sweep_cfg = kConfigs / "case_ii_sweep.json";
    auto j = json::parse(slurp(sweep_cfg));
    j["deployment"]["N"] = json::array({4, 8});
    const auto small = write_config("sweep_repeat.json", j);
    const auto s1 = scratch("s1.csv"), s2 = scratch("s2.csv");
    ASSERT_EQ(run("sweep \"" + small.string() + "\" --out \"" + s1.string() + "\" --threads 1").code, 0);
    ASSERT_EQ(run("sweep \"" + small.string() + "\" --out \"" + s2.string() + "\" --threads 4").code, 0);
    EXPECT_EQ(slurp(s1), slurp(s2));
}

TEST(Cli, ThreadEnvironmentOverride) {
    ::setenv(swarm_init::cli::kThreadsEnv, "3", 1);
    EXPECT_EQ(swarm_init::cli::resolve_threads(1), 3);
    ::setenv(swarm_init::cli::kThreadsEnv, "junk", 1);
    EXPECT_EQ(swarm_init::cli::resolve_threads(2), 2);
    ::unsetenv(swarm_init::cli::kThreadsEnv);
    EXPECT_EQ(swarm_init::cli::resolve_threads(5), 5);
    EXPECT_GE(swarm_init::cli::resolve_threads(0), 1);
}

TEST(Cli, NumberFormatting) {
    EXPECT_EQ(swarm_init::cli::fmt(0.1), "0.1");
    EXPECT_EQ(swarm_init::cli::fmt(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(swarm_init::cli::fmt(1e-20), "1e-20");
}
