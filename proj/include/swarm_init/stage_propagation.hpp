#ifndef SWARM_INIT_STAGE_PROPAGATION_HPP
#define SWARM_INIT_STAGE_PROPAGATION_HPP

// Stage-to-stage affine recursion of the stacked edge state
//   ρ⁺ = A_k ρ + B_k w,   A_k = P [Φ_k; R(I - Φ_k)],   B_k = P [0; I],
// its Gaussian moments, and the closed-form product evaluation.
//
// Edge stacks are edge-major: entry 2e + c is component c of edge e, with
// components ordered as the [2C1p; C4p] drift-center difference. Operators are
// kept in their scalar form M (the full operator is M ⊗ I_2).
//
// Injected mismatches are defined for the reference orientation of each new
// edge (lower node index leading). A new edge stored the other way round gets
// a -1 on its rows of A_k and B_k.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "swarm_init/errors.hpp"
#include "swarm_init/graph_topology.hpp"
#include "swarm_init/numerics.hpp"
#include "swarm_init/orbit_core.hpp"

namespace swarm_init::propagation {

using graph::Edge;
using graph::ExpansionStep;
using graph::RowLadder;
using graph::StageGraph;
using numerics::Matrix;
using numerics::SymMatrix;
using numerics::Vector;
using orbit::DriftCenterState;
using orbit::Mat2;
using orbit::Vec2;

inline constexpr int kDim = 2;

struct ConsensusModel {
    double k_A = 0.0;
    double k_0 = 1.0;

    /// a in the closed-loop matrix a I_2.
    double rate() const { return k_A / k_0; }
    Mat2 closed_loop() const { return rate() * Mat2::Identity(); }
};

inline ConsensusModel make_consensus(double k_A, const orbit::OrbitModel& model) {
    if (!(k_A >= 0.0) || !std::isfinite(k_A)) throw InvalidArgument("k_A must be non-negative");
    return {k_A, model.k_0};
}

/// exp(-dt a L_e) on the scalar edge space.
inline Matrix contraction_scalar(const StageGraph& g, const ConsensusModel& c, double dt) {
    if (!(dt >= 0.0)) throw InvalidArgument("dt must be non-negative");
    if (!(c.k_A >= 0.0)) throw InvalidArgument("k_A must be non-negative");
    return g.edge_exponential(dt * c.rate());
}

/// Φ = exp(-dt a L_e) ⊗ I_2.
inline Matrix contraction(const StageGraph& g, const ConsensusModel& c, double dt) {
    return graph::kron_identity(contraction_scalar(g, c, dt), kDim);
}

/// Diagonal of ±1 from the stored orientation of each new edge.
inline Vector orientation_signs(const std::vector<Edge>& edges) {
    Vector s(static_cast<Eigen::Index>(edges.size()));
    for (std::size_t f = 0; f < edges.size(); ++f) s(f) = edges[f].reference_sign();
    return s;
}

struct LemmaOperators {
    Matrix A_scalar;  // m_{k+1} × m_k
    Matrix B_scalar;  // m_{k+1} × |F|

    Matrix A() const { return graph::kron_identity(A_scalar, kDim); }
    Matrix B() const { return graph::kron_identity(B_scalar, kDim); }
};

inline LemmaOperators build_lemma_operators(const StageGraph& g, const ExpansionStep& step,
                                            const ConsensusModel& c, double dt) {
    const Matrix phi = contraction_scalar(g, c, dt);
    const Matrix r = graph::anchor_projection_scalar(step, g);
    const Matrix p = step.permutation();
    const Vector sigma = orientation_signs(step.new_edges);
    const int m = g.num_edges();
    const int f = step.num_new_edges();

    Matrix stacked_a(m + f, m);
    stacked_a.topRows(m) = phi;
    stacked_a.bottomRows(f) =
        sigma.asDiagonal() * (r * (Matrix::Identity(m, m) - phi));
    Matrix stacked_b = Matrix::Zero(m + f, f);
    stacked_b.bottomRows(f) = sigma.asDiagonal();
    return {p * stacked_a, p * stacked_b};
}

// ----------------------------------------------------------------------------
// Injected mismatch
// ----------------------------------------------------------------------------

/// Free-drift durations of the leading and trailing satellite, in units of dt.
struct FreeDriftTiming {
    double leading = 2.0;
    double trailing = 1.0;
};

/// Per-satellite release dispersion: independent Gaussian errors on the
/// [2C1p; C4p] components with standard deviation factor × |nominal|.
inline Mat2 release_covariance(const DriftCenterState& nominal, double factor) {
    if (!(factor >= 0.0) || !std::isfinite(factor)) {
        throw InvalidArgument("variance factor must be non-negative");
    }
    const Vec2 v = nominal.vector();
    if (factor > 0.0 && (v(0) == 0.0 || v(1) == 0.0)) {
        throw DegenerateNominal("nominal drift-center component is zero; relative dispersion undefined");
    }
    Mat2 s = Mat2::Zero();
    s(0, 0) = factor * factor * v(0) * v(0);
    s(1, 1) = factor * factor * v(1) * v(1);
    return s;
}

/// w = G ξ, with ξ the stacked release centers of the involved satellites.
struct InjectedMismatch {
    Vector mean;                  // 2|F|
    SymMatrix cov;                // 2|F| × 2|F|
    Matrix gain;                  // G, 2|F| × 2·|satellites|
    std::vector<int> satellites;  // node ids, ascending; block order of ξ
    Vector release_mean;          // ξ mean
    Vector release_sd;            // ξ standard deviations
};

/// `nominal[v]` is the drag-corrected nominal drift center of node v.
inline InjectedMismatch injected_mismatch(const orbit::OrbitModel& model,
                                          const std::vector<Edge>& new_edges,
                                          const std::vector<DriftCenterState>& nominal,
                                          double dt, double factor,
                                          FreeDriftTiming timing = {}) {
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(timing.leading >= 0.0 && timing.trailing >= 0.0)) {
        throw InvalidArgument("free-drift durations must be non-negative");
    }
    std::vector<int> sats;
    for (const auto& e : new_edges) {
        for (int v : {e.lo(), e.hi()}) {
            if (v < 0 || v >= static_cast<int>(nominal.size())) {
                throw DimensionMismatch("no nominal drift center for node " + std::to_string(v));
            }
            sats.push_back(v);
        }
    }
    std::sort(sats.begin(), sats.end());
    sats.erase(std::unique(sats.begin(), sats.end()), sats.end());
    auto slot = [&](int v) {
        return static_cast<Eigen::Index>(std::lower_bound(sats.begin(), sats.end(), v) - sats.begin());
    };

    const auto nf = static_cast<Eigen::Index>(new_edges.size());
    const auto ns = static_cast<Eigen::Index>(sats.size());
    const Mat2 psi_lead = orbit::free_drift_transition(model, timing.leading * dt);
    const Mat2 psi_trail = orbit::free_drift_transition(model, timing.trailing * dt);

    InjectedMismatch w;
    w.satellites = sats;
    w.gain = Matrix::Zero(kDim * nf, kDim * ns);
    for (Eigen::Index f = 0; f < nf; ++f) {
        const auto& e = new_edges[static_cast<std::size_t>(f)];
        w.gain.block<2, 2>(kDim * f, kDim * slot(e.lo())) += psi_lead;
        w.gain.block<2, 2>(kDim * f, kDim * slot(e.hi())) -= psi_trail;
    }
    w.release_mean.resize(kDim * ns);
    w.release_sd.resize(kDim * ns);
    Matrix release_cov = Matrix::Zero(kDim * ns, kDim * ns);
    for (Eigen::Index s = 0; s < ns; ++s) {
        const auto& nom = nominal[static_cast<std::size_t>(sats[static_cast<std::size_t>(s)])];
        w.release_mean.segment<2>(kDim * s) = nom.vector();
        const Mat2 cs = release_covariance(nom, factor);
        release_cov.block<2, 2>(kDim * s, kDim * s) = cs;
        w.release_sd(kDim * s) = std::sqrt(cs(0, 0));
        w.release_sd(kDim * s + 1) = std::sqrt(cs(1, 1));
    }
    w.mean = w.gain * w.release_mean;
    w.cov = SymMatrix::symmetrized(w.gain * release_cov * w.gain.transpose());
    return w;
}

/// Single-edge form: i leads, j trails.
inline InjectedMismatch injected_mismatch_edge(const orbit::OrbitModel& model,
                                               const DriftCenterState& nominal_i,
                                               const DriftCenterState& nominal_j, double dt,
                                               double factor, FreeDriftTiming timing = {}) {
    return injected_mismatch(model, {Edge{0, 1}}, {nominal_i, nominal_j}, dt, factor, timing);
}

// ----------------------------------------------------------------------------
// Moments
// ----------------------------------------------------------------------------

struct StageMoments {
    Vector mean;
    SymMatrix cov;

    int num_edges() const { return static_cast<int>(mean.size() / kDim); }
    Vec2 edge_mean(int e) const { return mean.segment<2>(kDim * e); }
    Mat2 edge_cov(int e) const { return cov.matrix().block<2, 2>(kDim * e, kDim * e); }
};

inline StageMoments zero_moments(int num_edges) {
    return {Vector::Zero(kDim * num_edges), SymMatrix::zero(kDim * num_edges)};
}

/// Moments of the first stage's edges: ρ⁽⁰⁾ = diag(σ) w⁽⁰⁾.
inline StageMoments initial_moments(const StageGraph& g0, const InjectedMismatch& w0) {
    if (w0.mean.size() != kDim * g0.num_edges()) {
        throw DimensionMismatch("initial mismatch does not cover the first-stage edges");
    }
    const Matrix s = graph::kron_identity(Matrix(orientation_signs(g0.edges()).asDiagonal()), kDim);
    return {s * w0.mean, SymMatrix::symmetrized(s * w0.cov.matrix() * s)};
}

inline StageMoments propagate_moments(const StageMoments& m, const LemmaOperators& ops,
                                      const InjectedMismatch& w) {
    const Matrix a = ops.A();
    const Matrix b = ops.B();
    if (a.cols() != m.mean.size() || b.cols() != w.mean.size() ||
        m.cov.dim() != m.mean.size() || w.cov.dim() != w.mean.size()) {
        throw DimensionMismatch("propagate_moments: operator and moment sizes disagree");
    }
    StageMoments out;
    out.mean = a * m.mean + b * w.mean;
    out.cov = SymMatrix::symmetrized(a * m.cov.matrix() * a.transpose() +
                                     b * w.cov.matrix() * b.transpose());
    return out;
}

/// ρ⁽ᴹ⁾ moments through Γ_{M,i} = (A_{M-1} ⋯ A_i) B_{i-1}.
inline StageMoments closed_form_stack(const std::vector<LemmaOperators>& ops,
                                      const StageMoments& initial,
                                      const std::vector<InjectedMismatch>& mismatches) {
    if (ops.size() != mismatches.size()) {
        throw DimensionMismatch("one mismatch per stage operator required");
    }
    const std::size_t M = ops.size();
    std::vector<Matrix> a(M), b(M);
    Eigen::Index rows = initial.mean.size();
    for (std::size_t j = 0; j < M; ++j) {
        a[j] = ops[j].A();
        b[j] = ops[j].B();
        if (a[j].cols() != rows || b[j].rows() != a[j].rows() ||
            b[j].cols() != mismatches[j].mean.size()) {
            throw DimensionMismatch("stage " + std::to_string(j) + " operator sizes disagree");
        }
        rows = a[j].rows();
    }

    Matrix tail = Matrix::Identity(rows, rows);  // A_{M-1} ⋯ A_i
    Vector mean = Vector::Zero(rows);
    Matrix cov = Matrix::Zero(rows, rows);
    for (std::size_t i = M; i >= 1; --i) {
        const Matrix gamma = tail * b[i - 1];
        mean += gamma * mismatches[i - 1].mean;
        cov += gamma * mismatches[i - 1].cov.matrix() * gamma.transpose();
        tail = tail * a[i - 1];
    }
    mean += tail * initial.mean;
    cov += tail * initial.cov.matrix() * tail.transpose();
    return {mean, SymMatrix::symmetrized(cov)};
}

// ----------------------------------------------------------------------------
// Ladder sequences
// ----------------------------------------------------------------------------

/// Everything the recursion needs for a prefix of a ladder.
struct SequenceInputs {
    const RowLadder* ladder = nullptr;
    int num_stages = 0;
    orbit::OrbitModel model;
    ConsensusModel consensus;
    std::vector<DriftCenterState> nominal;  // by node id
    double dt = 0.0;
    double factor = 0.0;
    FreeDriftTiming timing;

    void validate() const {
        if (ladder == nullptr) throw InvalidArgument("sequence has no ladder");
        if (num_stages < 1 || num_stages > ladder->num_stages()) {
            throw InvalidArgument("num_stages outside the ladder");
        }
        if (static_cast<int>(nominal.size()) < ladder->stages[num_stages - 1].num_nodes()) {
            throw DimensionMismatch("nominal centers missing for some nodes");
        }
    }
};

inline InjectedMismatch stage_mismatch(const SequenceInputs& in, int stage) {
    const auto& edges = stage == 0 ? in.ladder->stages[0].edges()
                                   : in.ladder->steps[stage - 1].new_edges;
    return injected_mismatch(in.model, edges, in.nominal, in.dt, in.factor, in.timing);
}

/// Explicit operators and mismatches in edge space (sizes grow as 5k; meant
/// for short ladders and cross-checks).
struct StageSequence {
    StageMoments initial;
    std::vector<LemmaOperators> ops;
    std::vector<InjectedMismatch> mismatches;  // mismatches[j] enters through ops[j]
};

inline StageSequence assemble_sequence(const SequenceInputs& in) {
    in.validate();
    StageSequence seq;
    seq.initial = initial_moments(in.ladder->stages[0], stage_mismatch(in, 0));
    for (int k = 1; k < in.num_stages; ++k) {
        seq.ops.push_back(build_lemma_operators(in.ladder->stages[k - 1], in.ladder->steps[k - 1],
                                                in.consensus, in.dt));
        seq.mismatches.push_back(stage_mismatch(in, k));
    }
    return seq;
}

inline std::vector<StageMoments> iterate_moments(const StageSequence& seq) {
    std::vector<StageMoments> out{seq.initial};
    for (std::size_t j = 0; j < seq.ops.size(); ++j) {
        out.push_back(propagate_moments(out.back(), seq.ops[j], seq.mismatches[j]));
    }
    return out;
}

// ----------------------------------------------------------------------------
// New-edge moments through the node-space reduction
// ----------------------------------------------------------------------------
//
// With y = E ρ the node divergence of the edge stack, E Φ = e^{-τL} E and
// R (I - Φ) ρ = Vᵀ L† (I - e^{-τL}) y, so the new-edge blocks and the next y
// depend on ρ only through y:
//   ρ_F = diag(σ) (w + M y),         M = Vᵀ L† (I - e^{-τL}),
//   y⁺  = [e^{-τL} y; 0] + H (w + M y),   H = reference-oriented incidence of F.
// This tracks n_k instead of m_k coordinates per component.

struct NewEdgeMoments {
    int edge = 0;       // edge id in the stage graph
    Vec2 mean;          // ρ_e mean, stored orientation
    Mat2 cov;           // ρ_e covariance
    Vec2 anchor_mean;   // (A_k μ)_e
    Vec2 injected_mean; // (B_k μ_w)_e
};

struct StageProfile {
    int stage = 0;
    std::vector<NewEdgeMoments> edges;
    double budget_anchor = 0.0;    // ‖stacked (A_k μ)_F‖
    double budget_injected = 0.0;  // ‖stacked (B_k μ_w)_F‖
};

namespace detail {

using RowMat2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

inline Matrix mean_as_rows(const Vector& v) {
    return Eigen::Map<const RowMat2>(v.data(), v.size() / kDim, kDim);
}

// Component block (a, b) of an edge-major covariance.
inline Matrix component_block(const Matrix& cov, int a, int b) {
    const Eigen::Index n = cov.rows() / kDim;
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = cov(kDim * i + a, kDim * j + b);
    }
    return out;
}

inline Matrix reference_incidence(int num_nodes, const std::vector<Edge>& edges) {
    Matrix h = Matrix::Zero(num_nodes, static_cast<Eigen::Index>(edges.size()));
    for (std::size_t f = 0; f < edges.size(); ++f) {
        h(edges[f].lo(), static_cast<Eigen::Index>(f)) = 1.0;
        h(edges[f].hi(), static_cast<Eigen::Index>(f)) = -1.0;
    }
    return h;
}

}  // namespace detail

inline std::vector<StageProfile> new_edge_profile(const SequenceInputs& in) {
    in.validate();
    const RowLadder& lad = *in.ladder;
    std::vector<StageProfile> profile;

    // Node-space mean (n × 2) and component blocks of the covariance.
    Matrix y_mean;
    Matrix c[2][2];

    auto record = [&](int stage, const std::vector<Edge>& edges, const std::vector<int>& ids,
                      const Matrix& w_rows, const Matrix (&w_cov)[2][2], const Matrix& anchor_rows,
                      const Matrix (&anchor_cov)[2][2]) {
        StageProfile p;
        p.stage = stage;
        for (std::size_t f = 0; f < edges.size(); ++f) {
            const auto fi = static_cast<Eigen::Index>(f);
            const double s = edges[f].reference_sign();
            NewEdgeMoments e;
            e.edge = ids[f];
            e.injected_mean = s * w_rows.row(fi).transpose();
            e.anchor_mean = s * anchor_rows.row(fi).transpose();
            e.mean = e.injected_mean + e.anchor_mean;
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) e.cov(a, b) = w_cov[a][b](fi, fi) + anchor_cov[a][b](fi, fi);
            }
            e.cov = 0.5 * (e.cov + e.cov.transpose()).eval();
            p.budget_anchor += anchor_rows.row(fi).squaredNorm();
            p.budget_injected += w_rows.row(fi).squaredNorm();
            p.edges.push_back(e);
        }
        p.budget_anchor = std::sqrt(p.budget_anchor);
        p.budget_injected = std::sqrt(p.budget_injected);
        profile.push_back(std::move(p));
    };

    // Stage 0: every edge of the first graph is new.
    {
        const auto& g0 = lad.stages[0];
        const auto w = stage_mismatch(in, 0);
        const Matrix w_rows = detail::mean_as_rows(w.mean);
        Matrix w_cov[2][2];
        Matrix zero_cov[2][2];
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                w_cov[a][b] = detail::component_block(w.cov.matrix(), a, b);
                zero_cov[a][b] = Matrix::Zero(w_rows.rows(), w_rows.rows());
            }
        }
        std::vector<int> ids(static_cast<std::size_t>(g0.num_edges()));
        for (int e = 0; e < g0.num_edges(); ++e) ids[static_cast<std::size_t>(e)] = e;
        record(0, g0.edges(), ids, w_rows, w_cov, Matrix::Zero(w_rows.rows(), 2), zero_cov);

        const Matrix h = detail::reference_incidence(g0.num_nodes(), g0.edges());
        y_mean = h * w_rows;
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) c[a][b] = h * w_cov[a][b] * h.transpose();
        }
    }

    const double tau = in.dt * in.consensus.rate();
    for (int k = 1; k < in.num_stages; ++k) {
        const auto& g = lad.stages[k - 1];
        const auto& step = lad.steps[k - 1];
        const auto& eig = g.laplacian_spectrum();
        const double cut = g.zero_cut();
        const Eigen::Index n = g.num_nodes();
        const Eigen::Index n_next = lad.stages[k].num_nodes();

        Vector decay(eig.values.size()), gain(eig.values.size());
        for (Eigen::Index i = 0; i < decay.size(); ++i) {
            const double l = eig.values(i);
            decay(i) = std::exp(-tau * l);
            gain(i) = l > cut ? -std::expm1(-tau * l) / l : 0.0;
        }
        const Matrix& q = eig.vectors;
        const Matrix m_map = (step.anchor_matrix().transpose() * q) * gain.asDiagonal() * q.transpose();

        const auto w = stage_mismatch(in, k);
        const Matrix w_rows = detail::mean_as_rows(w.mean);
        Matrix w_cov[2][2];
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) w_cov[a][b] = detail::component_block(w.cov.matrix(), a, b);
        }

        const Matrix anchor_rows = m_map * y_mean;
        Matrix anchor_cov[2][2];
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) anchor_cov[a][b] = m_map * c[a][b] * m_map.transpose();
        }
        record(k, step.new_edges, graph::new_edge_ids(step), w_rows, w_cov, anchor_rows, anchor_cov);

        if (k + 1 == in.num_stages) break;

        // y⁺ = G y + H w with G = [T; 0] + H M.
        const Matrix h = detail::reference_incidence(static_cast<int>(n_next), step.new_edges);
        Matrix gmat = h * m_map;
        gmat.topRows(n) += q * decay.asDiagonal() * q.transpose();
        y_mean = gmat * y_mean + h * w_rows;
        Matrix next[2][2];
        for (int a = 0; a < 2; ++a) {
            for (int b = a; b < 2; ++b) {
                next[a][b] = gmat * c[a][b] * gmat.transpose() + h * w_cov[a][b] * h.transpose();
            }
        }
        c[0][0] = 0.5 * (next[0][0] + next[0][0].transpose());
        c[1][1] = 0.5 * (next[1][1] + next[1][1].transpose());
        c[0][1] = next[0][1];
        c[1][0] = next[0][1].transpose();
    }
    return profile;
}

}  // namespace swarm_init::propagation

#endif  // SWARM_INIT_STAGE_PROPAGATION_HPP
