#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "swarm_init/monte_carlo.hpp"

using namespace swarm_init;
using namespace swarm_init::montecarlo;

namespace {

TrialConfig small_config(int N, int trials, double factor) {
    TrialConfig cfg;
    cfg.problem = oracle::table1_problem();
    cfg.N = N;
    cfg.n_trials = trials;
    cfg.dt = 4.0;
    cfg.factor = factor;
    cfg.master_seed = 42;
    cfg.worst_q = 10;
    return cfg;
}

}  // namespace

TEST(MonteCarlo, WindowOffsets) {
    EXPECT_EQ(window_offsets(4.0, 1.0), (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
    EXPECT_EQ(window_offsets(4.0, 1.5), (std::vector<double>{1.5, 3.0, 4.0}));
    EXPECT_EQ(window_offsets(4.0, 10.0), (std::vector<double>{4.0}));
}

TEST(MonteCarlo, SeedsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 10000; ++t) seen.insert(per_trial_seed(7, t));
    EXPECT_EQ(seen.size(), 10000u);
    EXPECT_NE(per_trial_seed(7, 0), per_trial_seed(8, 0));
}

TEST(MonteCarlo, Validation) {
    auto cfg = small_config(3, 10, 0.1);
    cfg.n_trials = 0;
    EXPECT_THROW(run_trials(cfg), InvalidArgument);
    cfg = small_config(3, 10, -0.1);
    EXPECT_THROW(run_trials(cfg), InvalidArgument);
    cfg = small_config(3, 10, 0.1);
    cfg.trace_step = 0.0;
    EXPECT_THROW(run_trials(cfg), InvalidArgument);
}

TEST(MonteCarlo, ReproducibleAcrossRerunsAndThreads) {
    auto cfg = small_config(8, 300, 0.3);
    cfg.keep_final_states = true;
    const auto a = run_trials(cfg);
    const auto b = run_trials(cfg);
    cfg.threads = 4;
    const auto c = run_trials(cfg);
    EXPECT_EQ(a.failed_trials, b.failed_trials);
    EXPECT_EQ(a.failed_trials, c.failed_trials);
    EXPECT_EQ(a.peak, c.peak);
    EXPECT_EQ(a.worst_envelope, c.worst_envelope);
    EXPECT_EQ(a.worst_trials, c.worst_trials);
    EXPECT_EQ((a.final_states - c.final_states).norm(), 0.0);
    cfg.master_seed = 43;
    EXPECT_NE(run_trials(cfg).peak, a.peak);
}

TEST(MonteCarlo, ZeroDispersionNeverFails) {
    auto cfg = small_config(10, 50, 0.0);
    cfg.sample_phase = false;
    cfg.keep_final_states = true;
    const auto r = run_trials(cfg);
    EXPECT_EQ(r.failures, 0);
    EXPECT_EQ(r.empirical_rate, 0.0);
    // All trials coincide with the nominal mean.
    const auto lad = graph::build_row_ladder(10);
    const auto mom = propagation::iterate_moments(
        propagation::assemble_sequence(safety::sequence_inputs(cfg.problem, lad, 10, 4.0, 0.0)));
    for (int t = 0; t < r.n_trials; ++t) {
        EXPECT_LE((r.final_states.col(t) - mom.back().mean).norm(), 1e-12 * mom.back().mean.norm());
    }
}

TEST(MonteCarlo, TinyKeepOutFailsEveryTrial) {
    auto cfg = small_config(3, 40, 0.1);
    cfg.problem.safety = safety::make_safety_config(1e-6, 0.01);
    const auto r = run_trials(cfg);
    EXPECT_EQ(r.failures, 40);
    EXPECT_EQ(r.empirical_rate, 1.0);
}

TEST(MonteCarlo, ReportShapesAndOrdering) {
    auto cfg = small_config(6, 200, 0.2);
    cfg.trace_step = 0.5;
    const auto r = run_trials(cfg);
    ASSERT_EQ(r.times.size(), 6u * 8u);
    EXPECT_EQ(r.times.front(), 0.5);
    EXPECT_EQ(r.times.back(), 24.0);
    ASSERT_EQ(r.worst_envelope.size(), r.times.size());
    ASSERT_EQ(r.worst_trials.size(), 10u);
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        EXPECT_GE(r.worst_envelope[i], r.worst_mean[i]);
    }
    for (std::size_t i = 1; i < r.worst_trials.size(); ++i) {
        EXPECT_GE(r.peak[r.worst_trials[i - 1]], r.peak[r.worst_trials[i]]);
    }
    const double cutoff = r.peak[r.worst_trials.back()];
    int above = 0;
    for (double p : r.peak) above += p > cutoff ? 1 : 0;
    EXPECT_LE(above, 10);
}

TEST(MonteCarlo, TraceAtActivationMatchesFinalState) {
    auto cfg = small_config(5, 100, 0.3);
    cfg.worst_q = cfg.n_trials;
    cfg.keep_final_states = true;
    const auto r = run_trials(cfg);
    const auto lad = graph::build_row_ladder(5);
    const auto ids = graph::new_edge_ids(lad.steps.back());
    double largest = 0.0;
    for (int t = 0; t < r.n_trials; ++t) {
        for (int id : ids) {
            largest = std::max(largest, std::hypot(r.final_states(2 * id, t), r.final_states(2 * id + 1, t)));
        }
    }
    EXPECT_NEAR(r.worst_envelope.back(), largest, 1e-12 * largest);
}

TEST(MonteCarlo, SampleMomentsMatchRecursion) {
    auto cfg = small_config(3, 20000, 0.2);
    cfg.sample_phase = false;
    cfg.keep_final_states = true;
    cfg.threads = 4;
    const auto r = run_trials(cfg);
    const auto lad = graph::build_row_ladder(3);
    const auto target = propagation::iterate_moments(
        propagation::assemble_sequence(safety::sequence_inputs(cfg.problem, lad, 3, 4.0, 0.2))).back();
    const Matrix& x = r.final_states;
    const Vector mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - mean;
    const Matrix cov = centered * centered.transpose() / (x.cols() - 1);
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        const double se = std::sqrt(target.cov(i, i) / x.cols());
        EXPECT_NEAR(mean(i), target.mean(i), 5.0 * se + 1e-15);
    }
    EXPECT_LE(oracle::rel_frobenius(cov, target.cov.matrix()), 0.05);
}
