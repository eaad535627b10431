#ifndef SWARM_INIT_SAFETY_ANALYSIS_HPP
#define SWARM_INIT_SAFETY_ANALYSIS_HPP

// Stage-wise chance-constrained safety test on newly formed edges, release
// policies, and the allowable-dispersion search over the release interval.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "swarm_init/drag_model.hpp"
#include "swarm_init/errors.hpp"
#include "swarm_init/graph_topology.hpp"
#include "swarm_init/numerics.hpp"
#include "swarm_init/orbit_core.hpp"
#include "swarm_init/parallel.hpp"
#include "swarm_init/stage_propagation.hpp"

namespace swarm_init::safety {

using numerics::Matrix;
using numerics::SymMatrix;
using numerics::Vector;
using orbit::DriftCenterState;
using orbit::Mat2;
using orbit::Vec2;
using propagation::StageMoments;

struct SafetyConfig {
    double r_c = 1.0;
    double beta = 0.01;
    int d = 2;
    double chi2 = 0.0;  // χ²_{d, 1-β}

    /// √(χ² λ_max(Σ)).
    double confidence_radius(double lambda_max) const {
        return std::sqrt(chi2 * std::max(0.0, lambda_max));
    }
};

inline SafetyConfig make_safety_config(double r_c, double beta) {
    if (!(r_c > 0.0) || !std::isfinite(r_c)) throw InvalidArgument("r_c must be positive");
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidProbability("beta must lie in (0, 1)");
    return {r_c, beta, 2, numerics::chi2_quantile(2, 1.0 - beta)};
}

struct EdgeVerdict {
    int edge = 0;
    double mean_norm = 0.0;  // ‖μ_e‖ [m]
    double radius = 0.0;     // √(χ² λ_max(Σ_e)) [m]
    double margin = 0.0;     // r_c - ‖μ_e‖ - radius [m]
    bool pass = false;
};

struct SafetyVerdict {
    int stage = 0;
    std::vector<EdgeVerdict> edges;
    int worst_edge = -1;  // smallest margin
    bool pass = true;
};

inline EdgeVerdict evaluate_edge(int edge, const Vec2& mean, const Mat2& cov,
                                 const SafetyConfig& cfg) {
    const SymMatrix s = SymMatrix::symmetrized(cov);
    const double tol = 1e-12 * std::max(1.0, s.matrix().cwiseAbs().maxCoeff());
    const double lmin = 0.5 * (s(0, 0) + s(1, 1)) -
                        std::hypot(0.5 * (s(0, 0) - s(1, 1)), s(0, 1));
    if (lmin < -tol) throw NotPSD("edge " + std::to_string(edge) + " covariance");
    EdgeVerdict v;
    v.edge = edge;
    v.mean_norm = mean.norm();
    v.radius = cfg.confidence_radius(numerics::lambda_max(s));
    v.margin = cfg.r_c - (v.mean_norm + v.radius);
    v.pass = v.margin >= 0.0;
    return v;
}

inline void finalize(SafetyVerdict& out) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& e : out.edges) {
        out.pass = out.pass && e.pass;
        if (e.margin < worst) {
            worst = e.margin;
            out.worst_edge = e.edge;
        }
    }
}

/// Theorem-style test of the listed (new) edges of a stage stack.
inline SafetyVerdict edge_safety(const StageMoments& m, const std::vector<int>& step_edges,
                                 const SafetyConfig& cfg, int stage = 0) {
    SafetyVerdict out;
    out.stage = stage;
    const int num_edges = m.num_edges();
    for (int e : step_edges) {
        if (e < 0 || e >= num_edges) throw BadEdge("edge " + std::to_string(e));
        Matrix j = Matrix::Zero(2, m.mean.size());
        j(0, 2 * e) = 1.0;
        j(1, 2 * e + 1) = 1.0;
        const Vec2 mu = j * m.mean;
        const Mat2 sigma = j * m.cov.matrix() * j.transpose();
        out.edges.push_back(evaluate_edge(e, mu, sigma, cfg));
    }
    finalize(out);
    return out;
}

/// Same test on a profile stage whose covariances are scaled by factor².
inline SafetyVerdict profile_safety(const propagation::StageProfile& p, double factor,
                                    const SafetyConfig& cfg) {
    SafetyVerdict out;
    out.stage = p.stage;
    for (const auto& e : p.edges) {
        out.edges.push_back(evaluate_edge(e.edge, e.mean, factor * factor * e.cov, cfg));
    }
    finalize(out);
    return out;
}

// ----------------------------------------------------------------------------
// Release policies
// ----------------------------------------------------------------------------

enum class ReleaseMode { fixed_velocity, drift_matched };

/// Attitude phase used for the nominal (mean) drag correction. `worst_case`
/// picks the φ that maximizes |C1p'|, which bounds the along-track drift term
/// of the injected mismatch over all release phases.
enum class PhaseRule { zero, worst_case, fixed };

struct ReleasePolicy {
    ReleaseMode mode = ReleaseMode::fixed_velocity;
    double xdot = 0.001;  // [m/s]
    double ydot = 0.001;  // [m/s]
    double dT_ref = 4.0;  // [s]
    PhaseRule phase_rule = PhaseRule::zero;
    double phase = 0.0;   // [rad], used by PhaseRule::fixed
};

struct SatelliteParams {
    double rho = 1.18e-12;   // [kg/m^3]
    double C_d = 2.0;
    double mass = 1.0;       // [kg]
    double ell = 0.10;       // cube edge [m]
    double d_off = 0.01;     // impulse offset [m]
    int M_trunc = 5;
    std::optional<double> k_air;  // overrides rho C_d v^2
    double resonance_tol = drag::kDefaultResonanceTol;
};

struct NominalRelease {
    double xdot = 0.0, ydot = 0.0;  // [m/s]
    double dv = 0.0;                // [m/s]
    double spin_rate = 0.0;         // [rad/s]
    double k_air = 0.0;
    double phase = 0.0;             // nominal φ [rad]
    DriftCenterState base;          // no drag
    drag::DragIncrements increments;  // at the nominal φ
    DriftCenterState corrected;     // drag-corrected at the nominal φ
};

inline double resolved_k_air(const SatelliteParams& sat, const orbit::OrbitModel& model) {
    return sat.k_air ? *sat.k_air : drag::k_air_from_atmosphere(sat.rho, sat.C_d, model);
}

inline drag::DragForcing release_forcing(const NominalRelease& rel, const SatelliteParams& sat,
                                         double phi) {
    return drag::forcing_series(rel.k_air, sat.ell, sat.mass, rel.spin_rate, phi, sat.M_trunc);
}

/// Drag-corrected drift center of one satellite released with attitude phase φ.
inline DriftCenterState realized_center(const NominalRelease& rel, const orbit::OrbitModel& model,
                                        const SatelliteParams& sat, double phi) {
    const auto inc = drag::drag_increments(model, release_forcing(rel, sat, phi), sat.resonance_tol);
    return drag::corrected_drift_center(model, rel.base, inc);
}

/// argmax over φ of |C1p'(φ)|. C1_air has period π/2 in φ; a uniform scan is
/// refined by golden-section search around the best sample.
inline double worst_case_phase(const NominalRelease& rel, const orbit::OrbitModel& model,
                               const SatelliteParams& sat) {
    auto objective = [&](double phi) { return std::abs(realized_center(rel, model, sat, phi).C1p); };
    constexpr int samples = 512;
    const double period = M_PI / 2.0;
    const double step = period / samples;
    int best = 0;
    double best_val = -1.0;
    for (int i = 0; i < samples; ++i) {
        const double v = objective(i * step);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = (best - 1) * step, b = (best + 1) * step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = objective(c), fd = objective(d);
    while (b - a > 1e-10) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = objective(d);
        }
    }
    const double phi = std::fmod(0.5 * (a + b) + period, period);
    return objective(phi) >= best_val ? phi : best * step;
}

inline NominalRelease release_policy_nominal(const ReleasePolicy& policy,
                                             const orbit::OrbitModel& model,
                                             const SatelliteParams& sat, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!std::isfinite(policy.xdot) || !std::isfinite(policy.ydot)) {
        throw InvalidArgument("release velocities must be finite");
    }
    double scale = 1.0;
    if (policy.mode == ReleaseMode::drift_matched) {
        if (!(policy.dT_ref > 0.0)) throw InvalidArgument("dT_ref must be positive");
        scale = policy.dT_ref / dt;
    }
    NominalRelease rel;
    rel.xdot = scale * policy.xdot;
    rel.ydot = scale * policy.ydot;
    rel.dv = std::hypot(rel.xdot, rel.ydot);
    rel.spin_rate = drag::tip_off_spin_rate(rel.dv, sat.d_off, sat.ell);
    rel.k_air = resolved_k_air(sat, model);
    rel.base = orbit::drift_center_of(
        orbit::elements_from_state(model, {0.0, 0.0, rel.xdot, rel.ydot}));
    switch (policy.phase_rule) {
        case PhaseRule::zero: rel.phase = 0.0; break;
        case PhaseRule::fixed: rel.phase = policy.phase; break;
        case PhaseRule::worst_case: rel.phase = worst_case_phase(rel, model, sat); break;
    }
    rel.increments =
        drag::drag_increments(model, release_forcing(rel, sat, rel.phase), sat.resonance_tol);
    rel.corrected = drag::corrected_drift_center(model, rel.base, rel.increments);
    return rel;
}

// ----------------------------------------------------------------------------
// Allowable dispersion
// ----------------------------------------------------------------------------

struct DesignProblem {
    orbit::OrbitModel model;
    propagation::ConsensusModel consensus;
    SafetyConfig safety;
    ReleasePolicy policy;
    SatelliteParams satellite;
    propagation::FreeDriftTiming timing;
};

/// Recursion inputs with every satellite released at the policy's nominal.
inline propagation::SequenceInputs sequence_inputs(const DesignProblem& prob,
                                                   const graph::RowLadder& ladder, int N,
                                                   double dt, double factor) {
    const auto rel = release_policy_nominal(prob.policy, prob.model, prob.satellite, dt);
    propagation::SequenceInputs in;
    in.ladder = &ladder;
    in.num_stages = N;
    in.model = prob.model;
    in.consensus = prob.consensus;
    in.nominal.assign(static_cast<std::size_t>(ladder.stages[N - 1].num_nodes()), rel.corrected);
    in.dt = dt;
    in.factor = factor;
    in.timing = prob.timing;
    return in;
}

inline constexpr double kFactorCap = 1.0;
inline constexpr double kSearchTol = 1e-4;

struct FactorResult {
    double factor = 0.0;
    int worst_stage = -1;
    int worst_edge = -1;
    double budget_anchor = 0.0;    // ‖(A_k μ)_F‖ at the worst stage [m]
    double budget_injected = 0.0;  // ‖(B_k μ_w)_F‖ at the worst stage [m]
    std::string diagnostic;        // empty when the nominal sequence is safe
};

/// Largest factor f in [0, f_max] (bisection to search_tol) for which every
/// new edge of the first N profile stages passes. `unit` is the profile at
/// f = 1; covariances scale as f² and means do not depend on f.
inline FactorResult allowable_factor_from_profile(const std::vector<propagation::StageProfile>& unit,
                                                  int N, const SafetyConfig& cfg,
                                                  double search_tol = kSearchTol,
                                                  double f_max = kFactorCap) {
    if (N < 1 || N > static_cast<int>(unit.size())) throw InvalidArgument("N outside the profile");
    if (!(search_tol > 0.0) || !(f_max > 0.0)) throw InvalidArgument("bad search bracket");

    auto passes = [&](double f) {
        for (int s = 0; s < N; ++s) {
            if (!profile_safety(unit[s], f, cfg).pass) return false;
        }
        return true;
    };

    // Binding stage: smallest per-edge factor (r_c - ‖μ‖) / √(χ² λ_max).
    FactorResult res;
    double binding = std::numeric_limits<double>::infinity();
    for (int s = 0; s < N; ++s) {
        for (const auto& e : unit[s].edges) {
            const double room = cfg.r_c - e.mean.norm();
            const double spread = cfg.confidence_radius(numerics::lambda_max(SymMatrix::symmetrized(e.cov)));
            const double fe = room < 0.0 ? -1.0 : (spread > 0.0 ? room / spread
                                                                : std::numeric_limits<double>::infinity());
            if (fe < binding) {
                binding = fe;
                res.worst_stage = s;
                res.worst_edge = e.edge;
            }
        }
    }
    if (res.worst_stage < 0) res.worst_stage = N - 1;
    res.budget_anchor = unit[res.worst_stage].budget_anchor;
    res.budget_injected = unit[res.worst_stage].budget_injected;

    if (!passes(0.0)) {
        res.factor = 0.0;
        res.diagnostic = "nominal_unsafe";
        return res;
    }
    if (passes(f_max)) {
        res.factor = f_max;
        return res;
    }
    double lo = 0.0, hi = f_max;
    while (hi - lo > search_tol) {
        const double mid = 0.5 * (lo + hi);
        (passes(mid) ? lo : hi) = mid;
    }
    res.factor = lo;
    return res;
}

inline std::vector<propagation::StageProfile> unit_profile(const DesignProblem& prob,
                                                           const graph::RowLadder& ladder,
                                                           int N, double dt) {
    return propagation::new_edge_profile(sequence_inputs(prob, ladder, N, dt, 1.0));
}

inline FactorResult max_allowable_factor(int N, double dt, const DesignProblem& prob,
                                         const graph::RowLadder& ladder,
                                         double search_tol = kSearchTol,
                                         double f_max = kFactorCap) {
    return allowable_factor_from_profile(unit_profile(prob, ladder, N, dt), N, prob.safety,
                                         search_tol, f_max);
}

struct SweepRow {
    double dt = 0.0;
    int N = 0;
    FactorResult result;
};

/// One row per (dt, N), dt-major in grid order. Each dt needs a single
/// propagation to max(N); smaller N read its prefix.
inline std::vector<SweepRow> sweep_interval(const std::vector<int>& Ns,
                                            const std::vector<double>& dt_grid,
                                            const DesignProblem& prob,
                                            const graph::RowLadder& ladder, int threads = 1,
                                            double search_tol = kSearchTol) {
    if (Ns.empty()) throw InvalidArgument("no cluster counts given");
    for (std::size_t i = 0; i < dt_grid.size(); ++i) {
        if (!(dt_grid[i] > 0.0)) throw InvalidArgument("dt grid must be positive");
        if (i > 0 && !(dt_grid[i] > dt_grid[i - 1])) throw InvalidArgument("dt grid must ascend");
    }
    const int n_max = *std::max_element(Ns.begin(), Ns.end());
    if (n_max > ladder.num_stages()) throw InvalidArgument("ladder shorter than requested N");

    std::vector<std::vector<SweepRow>> per_dt(dt_grid.size());
    parallel_for(static_cast<int>(dt_grid.size()), threads, [&](int i) {
        const double dt = dt_grid[static_cast<std::size_t>(i)];
        auto& rows = per_dt[static_cast<std::size_t>(i)];
        std::vector<propagation::StageProfile> prof;
        std::string failure;
        try {
            prof = unit_profile(prob, ladder, n_max, dt);
        } catch (const DegenerateNominal&) {
            failure = "degenerate_nominal";
        } catch (const ResonantSpin&) {
            failure = "resonant_spin";
        }
        for (int N : Ns) {
            SweepRow row{dt, N, {}};
            if (failure.empty()) {
                row.result = allowable_factor_from_profile(prof, N, prob.safety, search_tol);
            } else {
                row.result.diagnostic = failure;
            }
            rows.push_back(row);
        }
    });
    std::vector<SweepRow> out;
    for (auto& rows : per_dt) out.insert(out.end(), rows.begin(), rows.end());
    return out;
}

}  // namespace swarm_init::safety

#endif  // SWARM_INIT_SAFETY_ANALYSIS_HPP
