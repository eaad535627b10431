#ifndef SWARM_INIT_MONTE_CARLO_HPP
#define SWARM_INIT_MONTE_CARLO_HPP

// Realization-level validation of a release sequence. Every trial draws
// per-satellite release errors and attitude phases, pushes the realized
// mismatches through the same stage operators as the moment recursion, and
// records the activation-time norms of new edges plus their free-drift traces.
//
// Trials are processed in fixed chunks, stage by stage; the chunk layout and
// each trial's random stream depend only on the trial index, so results do
// not depend on the thread count.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "swarm_init/errors.hpp"
#include "swarm_init/graph_topology.hpp"
#include "swarm_init/numerics.hpp"
#include "swarm_init/parallel.hpp"
#include "swarm_init/safety_analysis.hpp"
#include "swarm_init/stage_propagation.hpp"

namespace swarm_init::montecarlo {

using numerics::Matrix;
using numerics::Vector;

inline constexpr int kChunkTrials = 64;

struct TrialConfig {
    int n_trials = 1000;
    std::uint64_t master_seed = 1;
    int N = 100;
    double dt = 4.0;
    double factor = 0.025;
    safety::DesignProblem problem;
    int worst_q = 100;
    bool sample_phase = true;   // draw φ ~ U[0, 2π) per satellite; else use the nominal φ
    double trace_step = 1.0;    // [s]
    int threads = 1;
    bool keep_final_states = false;

    void validate() const {
        if (n_trials < 1) throw InvalidArgument("n_trials must be at least 1");
        if (N < 1) throw InvalidArgument("N must be at least 1");
        if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
        if (!(factor >= 0.0)) throw InvalidArgument("factor must be non-negative");
        if (worst_q < 1) throw InvalidArgument("worst_q must be at least 1");
        if (!(trace_step > 0.0)) throw InvalidArgument("trace_step must be positive");
    }
};

struct TrialReport {
    int n_trials = 0;
    int failures = 0;
    double empirical_rate = 0.0;
    std::vector<int> failed_trials;
    std::vector<double> times;            // [s] since the first release window opened
    std::vector<double> worst_envelope;   // pointwise max over the worst-q trials [m]
    std::vector<double> worst_mean;       // pointwise mean over the worst-q trials [m]
    std::vector<int> worst_trials;        // indices, descending peak
    std::vector<double> peak;             // per trial [m]
    Matrix final_states;                  // 2 m_{N-1} × n_trials when kept
};

inline std::uint64_t per_trial_seed(std::uint64_t master, std::uint64_t trial) {
    return numerics::derive_seed(master, trial);
}

/// Offsets τ in (0, dt] sampled inside each free-drift window.
inline std::vector<double> window_offsets(double dt, double step) {
    std::vector<double> tau;
    for (int j = 1; j * step < dt - 1e-9 * dt; ++j) tau.push_back(j * step);
    tau.push_back(dt);
    return tau;
}

namespace detail {

struct StageData {
    std::vector<graph::Edge> new_edges;
    std::vector<int> new_ids;
    propagation::InjectedMismatch w;  // nominal-phase mismatch: gain and release sd
    Matrix A, B;                      // scalar operators (empty at stage 0)
    std::vector<Matrix> window_map;   // per τ: R (I - Φ(τ)) with orientation, |F| × m_{k-1}
    std::vector<orbit::Mat2> psi_lead, psi_trail;  // per τ
    Vector sigma;                     // orientation of the new edges
};

inline StageData stage_data(const propagation::SequenceInputs& in, int s,
                            const std::vector<double>& taus) {
    const auto& lad = *in.ladder;
    StageData d;
    d.w = propagation::stage_mismatch(in, s);
    if (s == 0) {
        d.new_edges = lad.stages[0].edges();
        d.new_ids.resize(d.new_edges.size());
        std::iota(d.new_ids.begin(), d.new_ids.end(), 0);
    } else {
        const auto& g = lad.stages[s - 1];
        const auto& step = lad.steps[s - 1];
        d.new_edges = step.new_edges;
        d.new_ids = graph::new_edge_ids(step);
        const auto ops = propagation::build_lemma_operators(g, step, in.consensus, in.dt);
        d.A = ops.A_scalar;
        d.B = ops.B_scalar;
        const auto& eig = g.laplacian_spectrum();
        const double cut = g.zero_cut();
        const Matrix vq = step.anchor_matrix().transpose() * eig.vectors;
        const Matrix qte = eig.vectors.transpose() * g.incidence();
        for (double tau : taus) {
            Vector h(eig.values.size());
            for (Eigen::Index i = 0; i < h.size(); ++i) {
                const double l = eig.values(i);
                h(i) = l > cut ? -std::expm1(-in.consensus.rate() * tau * l) / l : 0.0;
            }
            d.window_map.push_back(vq * h.asDiagonal() * qte);
        }
    }
    d.sigma = propagation::orientation_signs(d.new_edges);
    for (double tau : taus) {
        const double lag = in.dt - tau;
        d.psi_lead.push_back(orbit::free_drift_transition(
            in.model, std::max(0.0, in.timing.leading * in.dt - lag)));
        d.psi_trail.push_back(orbit::free_drift_transition(
            in.model, std::max(0.0, in.timing.trailing * in.dt - lag)));
    }
    return d;
}

}  // namespace detail

inline TrialReport run_trials(const TrialConfig& cfg) {
    cfg.validate();
    const auto& prob = cfg.problem;
    const auto ladder = graph::build_row_ladder(cfg.N);
    const auto in = safety::sequence_inputs(prob, ladder, cfg.N, cfg.dt, cfg.factor);
    const auto rel = safety::release_policy_nominal(prob.policy, prob.model, prob.satellite, cfg.dt);
    const auto taus = window_offsets(cfg.dt, cfg.trace_step);
    const int n_tau = static_cast<int>(taus.size());
    const int n_times = cfg.N * n_tau;
    const double r_c = prob.safety.r_c;

    TrialReport rep;
    rep.n_trials = cfg.n_trials;
    for (int s = 0; s < cfg.N; ++s) {
        for (double tau : taus) rep.times.push_back(s * cfg.dt + tau);
    }

    const int n_chunks = (cfg.n_trials + kChunkTrials - 1) / kChunkTrials;
    auto chunk_size = [&](int c) { return std::min(kChunkTrials, cfg.n_trials - c * kChunkTrials); };

    std::vector<numerics::CounterRng> rngs;
    rngs.reserve(static_cast<std::size_t>(cfg.n_trials));
    for (int t = 0; t < cfg.n_trials; ++t) rngs.emplace_back(per_trial_seed(cfg.master_seed, t));

    // ρ of each chunk: m × 2·size, trial j in columns 2j, 2j+1.
    std::vector<Matrix> rho(static_cast<std::size_t>(n_chunks));
    Matrix traces = Matrix::Zero(n_times, cfg.n_trials);
    std::vector<char> failed(static_cast<std::size_t>(cfg.n_trials), 0);

    for (int s = 0; s < cfg.N; ++s) {
        const auto d = detail::stage_data(in, s, taus);
        const auto nf = static_cast<Eigen::Index>(d.new_edges.size());
        const auto n_sats = static_cast<Eigen::Index>(d.w.satellites.size());

        parallel_for(n_chunks, cfg.threads, [&](int c) {
            const int size = chunk_size(c);
            const int first = c * kChunkTrials;
            // Realized release centers ξ, one column pair per trial: rows 2·sat + comp.
            Matrix xi(2 * n_sats, size);
            for (int j = 0; j < size; ++j) {
                auto& rng = rngs[static_cast<std::size_t>(first + j)];
                for (Eigen::Index v = 0; v < n_sats; ++v) {
                    const double phi = cfg.sample_phase ? 2.0 * M_PI * rng.uniform() : rel.phase;
                    const orbit::Vec2 center =
                        cfg.sample_phase ? safety::realized_center(rel, prob.model, prob.satellite, phi).vector()
                                         : rel.corrected.vector();
                    xi(2 * v, j) = center(0) + d.w.release_sd(2 * v) * rng.normal();
                    xi(2 * v + 1, j) = center(1) + d.w.release_sd(2 * v + 1) * rng.normal();
                }
            }
            // w at activation, |F| × 2·size.
            Matrix w(nf, 2 * size);
            const Matrix w_full = d.w.gain * xi;
            for (int j = 0; j < size; ++j) {
                for (Eigen::Index f = 0; f < nf; ++f) {
                    w(f, 2 * j) = w_full(2 * f, j);
                    w(f, 2 * j + 1) = w_full(2 * f + 1, j);
                }
            }

            Matrix& r = rho[static_cast<std::size_t>(c)];
            const Matrix prev = r;
            if (s == 0) {
                r = d.sigma.asDiagonal() * w;
            } else {
                r = d.A * prev + d.B * w;
            }

            // Free-drift traces over the window; the last offset is activation.
            for (int ti = 0; ti < n_tau; ++ti) {
                Matrix inj = Matrix::Zero(nf, 2 * size);
                for (Eigen::Index f = 0; f < nf; ++f) {
                    const auto& e = d.new_edges[static_cast<std::size_t>(f)];
                    const auto lo = std::lower_bound(d.w.satellites.begin(), d.w.satellites.end(), e.lo()) -
                                    d.w.satellites.begin();
                    const auto hi = std::lower_bound(d.w.satellites.begin(), d.w.satellites.end(), e.hi()) -
                                    d.w.satellites.begin();
                    for (int j = 0; j < size; ++j) {
                        const orbit::Vec2 a(xi(2 * lo, j), xi(2 * lo + 1, j));
                        const orbit::Vec2 b(xi(2 * hi, j), xi(2 * hi + 1, j));
                        const orbit::Vec2 v = d.psi_lead[ti] * a - d.psi_trail[ti] * b;
                        inj(f, 2 * j) = v(0);
                        inj(f, 2 * j + 1) = v(1);
                    }
                }
                if (s > 0) inj += d.window_map[ti] * prev;
                for (int j = 0; j < size; ++j) {
                    double worst = 0.0;
                    for (Eigen::Index f = 0; f < nf; ++f) {
                        worst = std::max(worst, std::hypot(inj(f, 2 * j), inj(f, 2 * j + 1)));
                    }
                    traces(s * n_tau + ti, first + j) = worst;
                }
            }

            for (int j = 0; j < size; ++j) {
                for (int id : d.new_ids) {
                    if (std::hypot(r(id, 2 * j), r(id, 2 * j + 1)) > r_c) {
                        failed[static_cast<std::size_t>(first + j)] = 1;
                    }
                }
            }
        });
    }

    for (int t = 0; t < cfg.n_trials; ++t) {
        if (failed[static_cast<std::size_t>(t)]) rep.failed_trials.push_back(t);
    }
    rep.failures = static_cast<int>(rep.failed_trials.size());
    rep.empirical_rate = static_cast<double>(rep.failures) / cfg.n_trials;

    rep.peak.resize(static_cast<std::size_t>(cfg.n_trials));
    for (int t = 0; t < cfg.n_trials; ++t) rep.peak[static_cast<std::size_t>(t)] = traces.col(t).maxCoeff();
    std::vector<int> order(static_cast<std::size_t>(cfg.n_trials));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rep.peak[static_cast<std::size_t>(a)] > rep.peak[static_cast<std::size_t>(b)]; });
    const int q = std::min(cfg.worst_q, cfg.n_trials);
    rep.worst_trials.assign(order.begin(), order.begin() + q);
    rep.worst_envelope.assign(static_cast<std::size_t>(n_times), 0.0);
    rep.worst_mean.assign(static_cast<std::size_t>(n_times), 0.0);
    for (int i = 0; i < n_times; ++i) {
        double mx = 0.0, sum = 0.0;
        for (int t : rep.worst_trials) {
            mx = std::max(mx, traces(i, t));
            sum += traces(i, t);
        }
        rep.worst_envelope[static_cast<std::size_t>(i)] = mx;
        rep.worst_mean[static_cast<std::size_t>(i)] = sum / q;
    }

    if (cfg.keep_final_states) {
        const Eigen::Index m = rho.front().rows();
        rep.final_states.resize(2 * m, cfg.n_trials);
        for (int c = 0; c < n_chunks; ++c) {
            for (int j = 0; j < chunk_size(c); ++j) {
                for (Eigen::Index e = 0; e < m; ++e) {
                    rep.final_states(2 * e, c * kChunkTrials + j) = rho[c](e, 2 * j);
                    rep.final_states(2 * e + 1, c * kChunkTrials + j) = rho[c](e, 2 * j + 1);
                }
            }
        }
    }
    return rep;
}

}  // namespace swarm_init::montecarlo

#endif  // SWARM_INIT_MONTE_CARLO_HPP
