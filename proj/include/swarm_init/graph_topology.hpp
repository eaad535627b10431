#ifndef SWARM_INIT_GRAPH_TOPOLOGY_HPP
#define SWARM_INIT_GRAPH_TOPOLOGY_HPP

// Expanding deployment graphs: oriented incidence matrices, node/edge
// Laplacians, anchor selection for each expansion step, and the row-of-three
// ladder used by the case studies.
//
// Edge-space quantities are evaluated through the node Laplacian L = E Eᵀ,
// which is smaller than L_e = Eᵀ E on graphs with cycles:
//   L_e† = Eᵀ (L†)² E,   exp(-τ L_e) = I + Eᵀ g(L) E with g(λ) = (e^{-τλ} - 1)/λ,
//   E L_e† = L† E.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "swarm_init/errors.hpp"
#include "swarm_init/numerics.hpp"

namespace swarm_init::graph {

using numerics::EigenDecomposition;
using numerics::Matrix;
using numerics::SymMatrix;
using numerics::Vector;

/// Oriented edge: column of E has +1 at `tail`, -1 at `head`.
struct Edge {
    int tail = 0;
    int head = 0;

    int lo() const { return std::min(tail, head); }
    int hi() const { return std::max(tail, head); }
    /// +1 when oriented from the lower node index to the higher one.
    int reference_sign() const { return tail < head ? 1 : -1; }
    bool same_pair(const Edge& o) const { return lo() == o.lo() && hi() == o.hi(); }
    bool operator==(const Edge& o) const { return tail == o.tail && head == o.head; }
};

/// Kronecker product M ⊗ I_d.
inline Matrix kron_identity(const Matrix& m, int d) {
    Matrix out = Matrix::Zero(m.rows() * d, m.cols() * d);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            if (v == 0.0) continue;
            for (int c = 0; c < d; ++c) out(i * d + c, j * d + c) = v;
        }
    }
    return out;
}

class StageGraph {
public:
    StageGraph() = default;

    StageGraph(int num_nodes, std::vector<Edge> edges) : n_(num_nodes), edges_(std::move(edges)) {
        if (n_ < 1) throw InvalidGraph("graph needs at least one node");
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            const auto& ed = edges_[e];
            if (ed.tail < 0 || ed.head < 0 || ed.tail >= n_ || ed.head >= n_) {
                throw InvalidGraph("edge " + std::to_string(e) + " references a missing node");
            }
            if (ed.tail == ed.head) throw InvalidGraph("self-loop at node " + std::to_string(ed.tail));
            for (std::size_t f = 0; f < e; ++f) {
                if (edges_[f].same_pair(ed)) {
                    throw InvalidGraph("duplicate edge {" + std::to_string(ed.lo()) + "," +
                                       std::to_string(ed.hi()) + "}");
                }
            }
        }
        incidence_ = Matrix::Zero(n_, static_cast<Eigen::Index>(edges_.size()));
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            incidence_(edges_[e].tail, static_cast<Eigen::Index>(e)) = 1.0;
            incidence_(edges_[e].head, static_cast<Eigen::Index>(e)) = -1.0;
        }
        spectrum_ = std::make_shared<const EigenDecomposition>(
            numerics::sym_eigen(node_laplacian()));
    }

    int num_nodes() const noexcept { return n_; }
    int num_edges() const noexcept { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Edge& edge(int e) const { return edges_.at(static_cast<std::size_t>(e)); }
    const Matrix& incidence() const noexcept { return incidence_; }

    SymMatrix node_laplacian() const {
        return SymMatrix::symmetrized(incidence_ * incidence_.transpose());
    }
    SymMatrix edge_laplacian() const {
        return SymMatrix::symmetrized(incidence_.transpose() * incidence_);
    }

    /// Eigendecomposition of the node Laplacian (ascending).
    const EigenDecomposition& laplacian_spectrum() const { return *spectrum_; }

    /// Eigenvalues below this are treated as the structural zeros of L.
    double zero_cut() const { return 1e-10 * std::max(1.0, numerics::spectral_radius(*spectrum_)); }

    /// λ₂(L); positive iff the graph is connected.
    double algebraic_connectivity() const {
        return n_ < 2 ? 0.0 : spectrum_->values(1);
    }

    bool connected() const {
        std::vector<int> parent(static_cast<std::size_t>(n_));
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        int components = n_;
        for (const auto& e : edges_) {
            const int a = find(e.tail), b = find(e.head);
            if (a != b) {
                parent[a] = b;
                --components;
            }
        }
        return components == 1;
    }

    /// L† through the node spectrum.
    Matrix laplacian_pinv() const {
        const double cut = zero_cut();
        return numerics::spectral_apply(*spectrum_,
                                        [cut](double l) { return l > cut ? 1.0 / l : 0.0; });
    }

    /// L_e† = Eᵀ (L†)² E.
    SymMatrix edge_laplacian_pinv() const {
        const double cut = zero_cut();
        const Matrix l2 = numerics::spectral_apply(
            *spectrum_, [cut](double l) { return l > cut ? 1.0 / (l * l) : 0.0; });
        return SymMatrix::symmetrized(incidence_.transpose() * l2 * incidence_);
    }

    /// Π = E L_e† Eᵀ = L L†, the projector onto range(E).
    Matrix projector() const {
        const double cut = zero_cut();
        return numerics::spectral_apply(*spectrum_, [cut](double l) { return l > cut ? 1.0 : 0.0; });
    }

    /// exp(-τ L_e) on the scalar edge space.
    Matrix edge_exponential(double tau) const {
        const auto m = static_cast<Eigen::Index>(edges_.size());
        if (tau == 0.0) return Matrix::Identity(m, m);
        const double cut = zero_cut();
        const Matrix et_q = incidence_.transpose() * spectrum_->vectors;
        Vector g(spectrum_->values.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const double l = spectrum_->values(i);
            g(i) = l > cut ? std::expm1(-tau * l) / l : -tau;
        }
        Matrix phi = et_q * g.asDiagonal() * et_q.transpose();
        phi.diagonal().array() += 1.0;
        return 0.5 * (phi + phi.transpose());
    }

    int find_edge(int a, int b) const {
        const Edge probe{a, b};
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            if (edges_[e].same_pair(probe)) return static_cast<int>(e);
        }
        return -1;
    }

    /// Same graph with edge `e` reversed.
    StageGraph with_flipped(int e) const {
        auto edges = edges_;
        auto& ed = edges.at(static_cast<std::size_t>(e));
        std::swap(ed.tail, ed.head);
        return StageGraph(n_, std::move(edges));
    }

private:
    int n_ = 0;
    std::vector<Edge> edges_;
    Matrix incidence_;
    std::shared_ptr<const EigenDecomposition> spectrum_;
};

/// One expansion G_k -> G_{k+1}: new nodes, new edges (construction order),
/// the anchor of each new edge, and the permutation into G_{k+1}'s edge order.
struct ExpansionStep {
    std::vector<int> new_nodes;
    std::vector<Edge> new_edges;
    std::vector<int> anchors;       // anchor node in G_k for each new edge
    std::vector<int> anchor_set;    // ascending attachment nodes (columns of U)
    std::vector<int> placement;     // position in G_{k+1} of the j-th entry of [old edges; new edges]
    int old_nodes = 0;
    int old_edges = 0;

    int num_new_edges() const { return static_cast<int>(new_edges.size()); }
    int next_edges() const { return old_edges + num_new_edges(); }

    /// U ∈ {0,1}^{n_k × u}.
    Matrix attachment_selection() const {
        Matrix u = Matrix::Zero(old_nodes, static_cast<Eigen::Index>(anchor_set.size()));
        for (std::size_t c = 0; c < anchor_set.size(); ++c) {
            u(anchor_set[c], static_cast<Eigen::Index>(c)) = 1.0;
        }
        return u;
    }

    /// S ∈ {0,1}^{u × |F|}.
    Matrix anchor_assignment() const {
        Matrix s = Matrix::Zero(static_cast<Eigen::Index>(anchor_set.size()), num_new_edges());
        for (int f = 0; f < num_new_edges(); ++f) {
            const auto it = std::find(anchor_set.begin(), anchor_set.end(), anchors[f]);
            s(it - anchor_set.begin(), f) = 1.0;
        }
        return s;
    }

    /// V = U S.
    Matrix anchor_matrix() const { return attachment_selection() * anchor_assignment(); }

    /// P with P · [old; new] = G_{k+1}-ordered stack (scalar, one row per edge).
    Matrix permutation() const {
        const int m = next_edges();
        Matrix p = Matrix::Zero(m, m);
        for (int j = 0; j < m; ++j) p(placement[j], j) = 1.0;
        return p;
    }
};

/// Builds G_{k+1} from G_k. Old edges keep their orientation; the next
/// graph's edges are ordered by (higher endpoint, lower endpoint), so every
/// old edge precedes every edge touching a new node.
inline std::pair<StageGraph, ExpansionStep> expand(const StageGraph& g, int new_node_count,
                                                   const std::vector<Edge>& new_edges,
                                                   const std::vector<int>& anchors) {
    if (new_edges.size() != anchors.size()) {
        throw InvalidGraph("every new edge needs exactly one anchor");
    }
    if (new_edges.empty()) throw InvalidGraph("expansion adds no edges");
    const int n_next = g.num_nodes() + new_node_count;
    for (int a : anchors) {
        if (a < 0 || a >= g.num_nodes()) throw InvalidGraph("anchor must be an existing node");
    }

    ExpansionStep step;
    step.old_nodes = g.num_nodes();
    step.old_edges = g.num_edges();
    step.new_edges = new_edges;
    step.anchors = anchors;
    for (int v = g.num_nodes(); v < n_next; ++v) step.new_nodes.push_back(v);
    step.anchor_set = anchors;
    std::sort(step.anchor_set.begin(), step.anchor_set.end());
    step.anchor_set.erase(std::unique(step.anchor_set.begin(), step.anchor_set.end()),
                          step.anchor_set.end());

    std::vector<Edge> concat = g.edges();
    concat.insert(concat.end(), new_edges.begin(), new_edges.end());
    std::vector<int> order(concat.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ea = concat[a];
        const auto& eb = concat[b];
        if (ea.hi() != eb.hi()) return ea.hi() < eb.hi();
        return ea.lo() < eb.lo();
    });
    // Old edges must stay in their stage-k order at the front.
    for (int j = 0; j < g.num_edges(); ++j) {
        if (order[j] != j) throw InvalidGraph("new edge sorts before an existing edge");
    }
    step.placement.assign(concat.size(), 0);
    std::vector<Edge> next_edges(concat.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        step.placement[order[pos]] = static_cast<int>(pos);
        next_edges[pos] = concat[order[pos]];
    }
    return {StageGraph(n_next, std::move(next_edges)), std::move(step)};
}

struct RowLadder {
    int row_width = 3;
    std::vector<StageGraph> stages;     // stages[k] holds k+1 rows
    std::vector<ExpansionStep> steps;   // steps[k]: stages[k] -> stages[k+1]

    int num_stages() const { return static_cast<int>(stages.size()); }
};

/// Rows of `row_width` satellites, node 3r + c for row r, column c. Each row
/// is a path (the intra-row coupling); node c of row r links to node c of
/// row r+1 (the inter-row coupling). New inter-row edges anchor at their
/// previous-row endpoint; new intra-row edges anchor at the previous-row node
/// in the column of their lower endpoint. Edges point from the lower node
/// index to the higher one unless `flip(lo, hi)` returns true.
inline RowLadder build_row_ladder(int num_rows, int row_width = 3,
                                  const std::function<bool(int, int)>& flip = {}) {
    if (num_rows < 1) throw InvalidArgument("ladder needs at least one row");
    if (row_width < 2) throw InvalidArgument("row width must be at least 2");
    RowLadder ladder;
    ladder.row_width = row_width;

    auto oriented = [&](int lo, int hi) {
        return flip && flip(lo, hi) ? Edge{hi, lo} : Edge{lo, hi};
    };
    std::vector<Edge> first;
    for (int c = 0; c + 1 < row_width; ++c) first.push_back(oriented(c, c + 1));
    ladder.stages.emplace_back(row_width, std::move(first));

    for (int r = 1; r < num_rows; ++r) {
        const int base = r * row_width;
        const int prev = base - row_width;
        std::vector<Edge> fresh;
        std::vector<int> anchors;
        for (int c = 0; c + 1 < row_width; ++c) {
            fresh.push_back(oriented(base + c, base + c + 1));
            anchors.push_back(prev + c);
        }
        for (int c = 0; c < row_width; ++c) {
            fresh.push_back(oriented(prev + c, base + c));
            anchors.push_back(prev + c);
        }
        auto [next, step] = expand(ladder.stages.back(), row_width, fresh, anchors);
        ladder.stages.push_back(std::move(next));
        ladder.steps.push_back(std::move(step));
    }
    return ladder;
}

/// R = (Vᵀ E_k L_{e,k}† ⊗ I_1) = Vᵀ L_k† E_k, one row per new edge.
inline Matrix anchor_projection_scalar(const ExpansionStep& step, const StageGraph& g) {
    if (!g.connected()) throw Disconnected("anchor projection needs a connected stage graph");
    if (step.old_nodes != g.num_nodes() || step.old_edges != g.num_edges()) {
        throw DimensionMismatch("expansion step does not belong to this graph");
    }
    const Matrix vt_lpinv = step.anchor_matrix().transpose() * g.laplacian_pinv();
    return vt_lpinv * g.incidence();
}

/// R ⊗ I_d, shape (d|F|) × (d m_k).
inline Matrix anchor_projection(const ExpansionStep& step, const StageGraph& g, int d = 2) {
    return kron_identity(anchor_projection_scalar(step, g), d);
}

/// J ∈ {0,1}^{d × d m} extracting the block of edge `e`.
inline Matrix edge_selector(const StageGraph& g, int e, int d = 2) {
    if (e < 0 || e >= g.num_edges()) throw BadEdge("edge " + std::to_string(e));
    Matrix j = Matrix::Zero(d, static_cast<Eigen::Index>(d) * g.num_edges());
    for (int c = 0; c < d; ++c) j(c, e * d + c) = 1.0;
    return j;
}

/// Edge ids in G_{k+1} of the step's new edges, in construction order.
inline std::vector<int> new_edge_ids(const ExpansionStep& step) {
    std::vector<int> ids;
    for (int f = 0; f < step.num_new_edges(); ++f) ids.push_back(step.placement[step.old_edges + f]);
    return ids;
}

inline nlohmann::json topology_json(const RowLadder& ladder) {
    const auto& last = ladder.stages.back();
    nlohmann::json nodes = nlohmann::json::array();
    for (int v = 0; v < last.num_nodes(); ++v) {
        nodes.push_back({{"id", v}, {"row", v / ladder.row_width}, {"column", v % ladder.row_width}});
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : last.edges()) edges.push_back({e.tail, e.head});
    nlohmann::json stages = nlohmann::json::array();
    for (int k = 0; k < ladder.num_stages(); ++k) {
        const auto& g = ladder.stages[k];
        stages.push_back({{"stage", k}, {"nodes", g.num_nodes()}, {"edges", g.num_edges()}});
    }
    return {{"row_width", ladder.row_width}, {"nodes", nodes}, {"edges", edges}, {"stages", stages}};
}

}  // namespace swarm_init::graph

#endif  // SWARM_INIT_GRAPH_TOPOLOGY_HPP
