#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "swarm_init/graph_topology.hpp"

using namespace swarm_init;
using namespace swarm_init::graph;

namespace {

Matrix brute_incidence(int n, const std::vector<Edge>& edges) {
    Matrix e = Matrix::Zero(n, static_cast<Eigen::Index>(edges.size()));
    for (std::size_t k = 0; k < edges.size(); ++k) {
        e(edges[k].tail, k) += 1.0;
        e(edges[k].head, k) -= 1.0;
    }
    return e;
}

}  // namespace

TEST(StageGraph, Validation) {
    EXPECT_THROW(StageGraph(0, {}), InvalidGraph);
    EXPECT_THROW(StageGraph(2, {{0, 2}}), InvalidGraph);
    EXPECT_THROW(StageGraph(2, {{1, 1}}), InvalidGraph);
    EXPECT_THROW(StageGraph(3, {{0, 1}, {1, 0}}), InvalidGraph);
}

TEST(StageGraph, IncidenceColumns) {
    const auto lad = build_row_ladder(6);
    for (const auto& g : lad.stages) {
        const Matrix& e = g.incidence();
        for (Eigen::Index c = 0; c < e.cols(); ++c) {
            EXPECT_EQ((e.col(c).array() == 1.0).count(), 1);
            EXPECT_EQ((e.col(c).array() == -1.0).count(), 1);
            EXPECT_EQ((e.col(c).array() == 0.0).count(), e.rows() - 2);
        }
        EXPECT_LE((e - brute_incidence(g.num_nodes(), g.edges())).norm(), 0.0);
    }
}

TEST(RowLadder, SingleRowIsPath) {
    const auto lad = build_row_ladder(1);
    const auto& g = lad.stages[0];
    EXPECT_EQ(g.num_nodes(), 3);
    EXPECT_EQ(g.num_edges(), 2);
    // EᵀE for P3 is [[2,-1],[-1,2]] with eigenvalues 1 and 3.
    Matrix le(2, 2);
    le << 2, -1, -1, 2;
    EXPECT_LE((g.edge_laplacian().matrix() - le).norm(), 0.0);
    const auto ev = oracle::jacobi_eigenvalues(g.edge_laplacian().matrix());
    EXPECT_NEAR(ev(0), 1.0, 1e-12);
    EXPECT_NEAR(ev(1), 3.0, 1e-12);
}

TEST(RowLadder, TwoRowsReproduceBlockStructure) {
    const auto lad = build_row_ladder(2);
    const auto& g = lad.stages[1];
    EXPECT_EQ(g.num_nodes(), 6);
    EXPECT_EQ(g.num_edges(), 7);
    const Matrix l = g.node_laplacian().matrix();
    Matrix adj = -l;
    adj.diagonal().setZero();
    Matrix la(3, 3), lb = Matrix::Identity(3, 3);
    la << 0, 1, 0, 1, 0, 1, 0, 1, 0;
    EXPECT_LE((adj.block(0, 0, 3, 3) - la).norm(), 0.0);
    EXPECT_LE((adj.block(3, 3, 3, 3) - la).norm(), 0.0);
    EXPECT_LE((adj.block(0, 3, 3, 3) - lb).norm(), 0.0);
    EXPECT_LE((adj.block(3, 0, 3, 3) - lb).norm(), 0.0);
    // Degrees on the diagonal.
    for (int v = 0; v < 6; ++v) EXPECT_EQ(l(v, v), adj.row(v).sum());
}

TEST(RowLadder, StepSizesAndDegrees) {
    const auto lad = build_row_ladder(5);
    EXPECT_EQ(lad.num_stages(), 5);
    for (int k = 0; k < lad.num_stages(); ++k) {
        EXPECT_EQ(lad.stages[k].num_nodes(), 3 * (k + 1));
        EXPECT_EQ(lad.stages[k].num_edges(), 2 + 5 * k);
    }
    for (const auto& s : lad.steps) {
        EXPECT_EQ(s.new_nodes.size(), 3u);
        EXPECT_EQ(s.num_new_edges(), 5);
    }
    const Matrix l = lad.stages[4].node_laplacian().matrix();
    EXPECT_EQ(l(3 * 2 + 1, 3 * 2 + 1), 4.0);  // middle node of an interior row
    EXPECT_EQ(l(3 * 2, 3 * 2), 3.0);
    EXPECT_EQ(l(1, 1), 3.0);
    EXPECT_EQ(l(0, 0), 2.0);
}

TEST(RowLadder, SpectraOfNodeAndEdgeLaplaciansAgree) {
    const auto lad = build_row_ladder(8);
    for (const auto& g : lad.stages) {
        const Vector ln = oracle::jacobi_eigenvalues(g.node_laplacian().matrix());
        const Vector le = oracle::jacobi_eigenvalues(g.edge_laplacian().matrix());
        std::vector<double> a, b;
        for (Eigen::Index i = 0; i < ln.size(); ++i) {
            if (ln(i) > 1e-9) a.push_back(ln(i));
        }
        for (Eigen::Index i = 0; i < le.size(); ++i) {
            if (le(i) > 1e-9) b.push_back(le(i));
        }
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
        EXPECT_EQ(static_cast<int>(a.size()), g.num_nodes() - 1);
        EXPECT_GT(g.algebraic_connectivity(), 0.0);
        EXPECT_TRUE(g.connected());
    }
}

TEST(StageGraph, EdgePseudoInverseAndProjector) {
    const auto lad = build_row_ladder(6);
    for (const auto& g : lad.stages) {
        const Matrix& e = g.incidence();
        const Matrix ref = oracle::svd_pinv(g.edge_laplacian().matrix());
        EXPECT_LE((g.edge_laplacian_pinv().matrix() - ref).norm(), 1e-9 * ref.norm());
        const Matrix pi = g.projector();
        EXPECT_LE((pi * pi - pi).norm(), 1e-9);
        EXPECT_LE((pi * e - e).norm(), 1e-9);
        const Matrix pi_edge = e * g.edge_laplacian_pinv().matrix() * e.transpose();
        EXPECT_LE((pi - pi_edge).norm(), 1e-9);
        EXPECT_LE((g.laplacian_pinv() - oracle::svd_pinv(g.node_laplacian().matrix())).norm(), 1e-9);
    }
}

TEST(StageGraph, EdgeExponentialMatchesDirect) {
    const auto lad = build_row_ladder(5);
    for (const auto& g : lad.stages) {
        for (double tau : {0.0, 0.05, 0.7, 3.0}) {
            const Matrix ref = oracle::taylor_expm(-tau * g.edge_laplacian().matrix());
            EXPECT_LE((g.edge_exponential(tau) - ref).norm(), 1e-10);
        }
    }
}

TEST(StageGraph, ConnectivityAndFlip) {
    const StageGraph split(4, {{0, 1}, {2, 3}});
    EXPECT_FALSE(split.connected());
    EXPECT_NEAR(split.algebraic_connectivity(), 0.0, 1e-12);
    const auto lad = build_row_ladder(2);
    const auto flipped = lad.stages[1].with_flipped(3);
    EXPECT_EQ(flipped.edge(3).tail, lad.stages[1].edge(3).head);
    EXPECT_EQ(flipped.find_edge(lad.stages[1].edge(3).tail, lad.stages[1].edge(3).head), 3);
    EXPECT_EQ(flipped.find_edge(0, 5), -1);
}

TEST(ExpansionStep, SelectionPermutationAndOrdering) {
    const auto lad = build_row_ladder(6);
    for (std::size_t k = 0; k < lad.steps.size(); ++k) {
        const auto& s = lad.steps[k];
        const auto& g0 = lad.stages[k];
        const auto& g1 = lad.stages[k + 1];
        const Matrix v = s.anchor_matrix();
        EXPECT_EQ(v.rows(), g0.num_nodes());
        EXPECT_EQ(v.cols(), 5);
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            EXPECT_EQ(v.col(c).sum(), 1.0);
            EXPECT_EQ(v(s.anchors[c], c), 1.0);
        }
        const Matrix p = s.permutation();
        EXPECT_LE((p * p.transpose() - Matrix::Identity(p.rows(), p.cols())).norm(), 0.0);
        // P applied to [old; new] incidence columns gives the next graph's edge order.
        std::vector<Edge> concat = g0.edges();
        concat.insert(concat.end(), s.new_edges.begin(), s.new_edges.end());
        const Matrix stacked = brute_incidence(g1.num_nodes(), concat);
        EXPECT_LE((stacked * p.transpose() - g1.incidence()).norm(), 0.0);
        for (int e = 0; e < g0.num_edges(); ++e) EXPECT_EQ(g1.edge(e), g0.edge(e));
        const auto ids = new_edge_ids(s);
        for (int f = 0; f < s.num_new_edges(); ++f) EXPECT_EQ(g1.edge(ids[f]), s.new_edges[f]);
        // Inter-row edges anchor at the same column of the previous row.
        for (int f = 0; f < s.num_new_edges(); ++f) {
            const auto& e = s.new_edges[f];
            if (e.hi() - e.lo() == 3) {
                EXPECT_EQ(s.anchors[f], e.lo());
            } else {
                EXPECT_EQ(s.anchors[f], e.lo() - 3);
            }
        }
    }
}

TEST(ExpansionStep, RejectsMalformed) {
    const auto g = build_row_ladder(1).stages[0];
    EXPECT_THROW(expand(g, 1, {{2, 3}}, {}), InvalidGraph);
    EXPECT_THROW(expand(g, 1, {{2, 3}}, {7}), InvalidGraph);
    EXPECT_THROW(expand(g, 1, {}, {}), InvalidGraph);
}

TEST(AnchorProjection, SingleEdgeAgainstLeastSquares) {
    const StageGraph g(2, {{0, 1}});
    auto [next, step] = expand(g, 1, {{1, 2}}, {1});
    const Matrix r = anchor_projection(step, g, 2);
    ASSERT_EQ(r.rows(), 2);
    ASSERT_EQ(r.cols(), 2);
    // Least-squares node recovery from ρ: r̂ = argmin ‖Eᵀ r - ρ‖ with minimum norm.
    const Matrix e = g.incidence();
    const Matrix recover = oracle::svd_pinv(e.transpose());
    Matrix expected = kron_identity(recover.row(1), 2);
    EXPECT_LE((r - expected).norm(), 1e-12);
    // e₁ᵀ E L† = [-1/2] for the P2 graph.
    EXPECT_NEAR(anchor_projection_scalar(step, g)(0, 0), -0.5, 1e-14);
    EXPECT_LE((r * Vector::Zero(2)).norm(), 0.0);
}

TEST(AnchorProjection, LadderAgainstLiteralFormula) {
    const auto lad = build_row_ladder(6);
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    for (std::size_t k = 0; k < lad.steps.size(); ++k) {
        const auto& g = lad.stages[k];
        const auto& s = lad.steps[k];
        const Matrix e = g.incidence();
        const Matrix literal = s.anchor_matrix().transpose() * e * oracle::svd_pinv(e.transpose() * e);
        const Matrix r = anchor_projection_scalar(s, g);
        EXPECT_LE((r - literal).norm(), 1e-9);
        // (Π ⊗ I) r = (E L_e† ⊗ I) ρ for ρ = (Eᵀ ⊗ I) r.
        Matrix nodes(g.num_nodes(), 2);
        for (Eigen::Index i = 0; i < nodes.size(); ++i) nodes.data()[i] = nd(gen);
        const Matrix rho = e.transpose() * nodes;
        const Matrix lhs = g.projector() * nodes;
        const Matrix rhs = e * g.edge_laplacian_pinv().matrix() * rho;
        EXPECT_LE((lhs - rhs).norm(), 1e-9 * nodes.norm());
        const Matrix big = anchor_projection(s, g, 2);
        EXPECT_EQ(big.rows(), 2 * s.num_new_edges());
        EXPECT_EQ(big.cols(), 2 * g.num_edges());
    }
}

TEST(AnchorProjection, DisconnectedRejected) {
    const StageGraph split(4, {{0, 1}, {2, 3}});
    auto [next, step] = expand(split, 1, {{3, 4}}, {3});
    EXPECT_THROW(anchor_projection_scalar(step, split), Disconnected);
}

TEST(EdgeSelector, PartitionOfIdentity) {
    const auto g = build_row_ladder(3).stages[2];
    Matrix sum = Matrix::Zero(2 * g.num_edges(), 2 * g.num_edges());
    for (int e = 0; e < g.num_edges(); ++e) {
        const Matrix j = edge_selector(g, e);
        EXPECT_LE((j * j.transpose() - Matrix::Identity(2, 2)).norm(), 0.0);
        sum += j.transpose() * j;
    }
    EXPECT_LE((sum - Matrix::Identity(sum.rows(), sum.cols())).norm(), 0.0);
    const Matrix j0 = edge_selector(g, 0);
    EXPECT_LE((j0.leftCols(2) - Matrix::Identity(2, 2)).norm(), 0.0);
    EXPECT_EQ(j0.rightCols(j0.cols() - 2).norm(), 0.0);
    EXPECT_THROW(edge_selector(g, g.num_edges()), BadEdge);
    EXPECT_THROW(edge_selector(g, -1), BadEdge);
}

TEST(TopologyJson, Layout) {
    const auto lad = build_row_ladder(3);
    const auto j = topology_json(lad);
    EXPECT_EQ(j["row_width"], 3);
    EXPECT_EQ(j["nodes"].size(), 9u);
    EXPECT_EQ(j["edges"].size(), 12u);
    EXPECT_EQ(j["stages"].size(), 3u);
    EXPECT_EQ(j["stages"][2]["edges"], 12);
    EXPECT_EQ(j["nodes"][4]["row"], 1);
    EXPECT_EQ(j["nodes"][4]["column"], 1);
}
