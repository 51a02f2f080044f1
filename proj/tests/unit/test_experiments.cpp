#include <gtest/gtest.h>

#include <set>

#include "gsat/gsat.hpp"

using namespace gsat;

namespace {

using Edges = std::vector<std::pair<NodeId, NodeId>>;

Graph ring(std::size_t n, std::size_t classes) {
    Edges e;
    for (NodeId i = 0; i < n; ++i) e.emplace_back(i, static_cast<NodeId>((i + 1) % n));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
    DenseMatrix x(n, 2);
    for (std::size_t i = 0; i < n; ++i) x(i, 0) = static_cast<double>(i);
    return Graph::build(n, e, x, y, classes);
}

Graph sbm_fixture(std::uint64_t seed) {
    Rng rng(seed);
    Graph g = sbm_generate({}, rng);
    return g.with_masks(split_nodes(g, SplitPolicy::copurchase(), rng));
}

std::set<std::pair<NodeId, NodeId>> edge_set(const Graph& g) {
    const auto e = g.undirected_edges();
    return {e.begin(), e.end()};
}

}  // namespace

TEST(RandomAttack, ZeroRateUnchanged) {
    const Graph g = ring(10, 2);
    Rng rng(1);
    EXPECT_EQ(random_attack(g, 0.0, rng), g);
}

TEST(RandomAttack, FullRateDoublesEdges) {
    const Graph g = ring(10, 2);
    Rng rng(2);
    const Graph a = random_attack(g, 1.0, rng);
    EXPECT_EQ(g.num_undirected_edges(), 10u);
    EXPECT_EQ(a.num_undirected_edges(), 20u);
    EXPECT_EQ(a.num_edge_slots(), g.num_edge_slots() + 20u);
}

TEST(RandomAttack, PreservesAttributesAndOldEdges) {
    Graph g = sbm_fixture(3);
    Rng rng(3);
    const Graph a = random_attack(g, 0.2, rng);
    EXPECT_EQ(a.num_nodes(), g.num_nodes());
    EXPECT_EQ(a.features(), g.features());
    EXPECT_TRUE(std::equal(a.labels().begin(), a.labels().end(), g.labels().begin()));
    EXPECT_EQ(a.masks(), g.masks());
    const auto before = edge_set(g), after = edge_set(a);
    for (const auto& e : before) EXPECT_TRUE(after.count(e));
    for (const auto& [u, v] : after) EXPECT_NE(u, v);
    EXPECT_EQ(after.size(), before.size() + random_attack_quota(g, 0.2));
}

TEST(RandomAttack, SameSeedSameEdges) {
    const Graph g = sbm_fixture(4);
    Rng a(5), b(5);
    EXPECT_EQ(random_attack(g, 0.5, a), random_attack(g, 0.5, b));
}

TEST(RandomAttack, DenseRegimeUsesEnumeration) {
    // 6 nodes: 15 pairs, 6 present, 9 free; rate 1.0 asks for 6 (> 9/2).
    const Graph g = ring(6, 2);
    Rng rng(6);
    const Graph a = random_attack(g, 1.0, rng);
    EXPECT_EQ(a.num_undirected_edges(), 12u);
}

TEST(RandomAttack, InfeasibleRejected) {
    const Graph g = ring(5, 2);  // 5 present, 5 free
    Rng rng(7);
    EXPECT_THROW(random_attack(g, 1.2, rng), std::invalid_argument);
    EXPECT_THROW(random_attack(g, -0.1, rng), std::invalid_argument);
}

TEST(RandomAttack, SelfLoopsExcludedFromQuota) {
    const Graph g = add_self_loops(ring(10, 2));
    EXPECT_EQ(random_attack_quota(g, 0.5), 5u);
}

TEST(TargetedAttack, ZeroBudgetUnchanged) {
    const Graph g = ring(10, 2);
    Rng rng(1);
    const std::vector<NodeId> t{0};
    EXPECT_EQ(degree_targeted_attack(g, 0, t, rng), g);
}

TEST(TargetedAttack, AddsBudgetEdgesToOtherClass) {
    const Graph g = sbm_fixture(8);
    Rng rng(2);
    const std::vector<NodeId> t{5};
    const Graph a = degree_targeted_attack(g, 2, t, rng);
    EXPECT_EQ(a.num_undirected_edges(), g.num_undirected_edges() + 2);
    const auto before = edge_set(g);
    std::size_t added = 0;
    for (const auto& e : edge_set(a)) {
        if (before.count(e)) continue;
        ++added;
        EXPECT_TRUE(e.first == 5 || e.second == 5);
        const NodeId other = e.first == 5 ? e.second : e.first;
        EXPECT_NE(g.labels()[other], g.labels()[5]);
    }
    EXPECT_EQ(added, 2u);
}

TEST(TargetedAttack, PicksHighestDegreePartners) {
    // Star centre 0 (class 1) has the highest degree; target 3 is class 0 and not adjacent to it.
    const Edges e{{0, 1}, {0, 2}, {0, 4}, {3, 5}};
    const Graph g = Graph::build(6, e, DenseMatrix(6, 1), {1, 0, 0, 0, 1, 1}, 2);
    Rng rng(3);
    const std::vector<NodeId> t{3};
    EXPECT_TRUE(degree_targeted_attack(g, 1, t, rng).has_edge(3, 0));
}

TEST(TargetedAttack, InfeasibleBudgetRejected) {
    const Graph g = ring(4, 2);
    Rng rng(4);
    const std::vector<NodeId> t{0};
    EXPECT_THROW(degree_targeted_attack(g, 2, t, rng), std::invalid_argument);
}

TEST(Flops, MatmulRule) { EXPECT_EQ(dense_matmul_flops(4, 3, 2), 48u); }

TEST(Flops, ChargeRule) {
    ForwardRecord rec;
    rec.num_nodes = 3;
    rec.num_edge_slots = 0;
    HeadRecord h;
    h.kind = AttentionKind::spiking;
    h.in_dim = 1;
    h.out_dim = 4;
    h.spikes.T = 1;
    h.spikes.input_spikes = {5};
    rec.layers = {{h}};
    EXPECT_EQ(count_flops(rec).attention.spike_adds, 10u);
}

TEST(Flops, BaselineRules) {
    ForwardRecord rec;
    rec.num_nodes = 3;
    rec.num_edge_slots = 7;
    HeadRecord h;
    h.kind = AttentionKind::baseline;
    h.in_dim = 5;
    h.out_dim = 4;
    rec.layers = {{h}};
    const auto r = count_flops(rec);
    EXPECT_EQ(r.projection.flops, 2u * 3 * 5 * 4);
    EXPECT_EQ(r.attention.flops, 2u * 8 * 7);
    EXPECT_EQ(r.normalization.flops, 2u * 7);
    EXPECT_EQ(r.aggregation.flops, 2u * 7 * 4);
    EXPECT_EQ(r.total().total(), r.projection.total() + r.attention.total() + r.normalization.total() + r.aggregation.total());
}

TEST(Flops, DeterministicAndGsatBelowGat) {
    const Graph g = sbm_fixture(9);
    for (const auto kind : {AttentionKind::spiking, AttentionKind::baseline}) {
        ModelConfig cfg;
        cfg.attention = kind;
        Rng r1(1), r2(1);
        const auto p = init_params(cfg, g.feature_dim(), g.num_classes(), r1);
        EXPECT_EQ(count_flops(cfg, g, p), count_flops(cfg, g, init_params(cfg, g.feature_dim(), g.num_classes(), r2)));
    }
    ModelConfig s, b;
    b.attention = AttentionKind::baseline;
    Rng rs(1), rb(1);
    const auto fs = count_flops(s, g, init_params(s, g.feature_dim(), g.num_classes(), rs));
    const auto fb = count_flops(b, g, init_params(b, g.feature_dim(), g.num_classes(), rb));
    EXPECT_LT(fs.attention_path().total(), fb.attention_path().total());
}

TEST(Flops, TraceFromOtherGraphRejected) {
    const Graph g = sbm_fixture(9);
    ForwardRecord rec;
    rec.num_nodes = 3;
    EXPECT_THROW(count_flops(ModelConfig{}, g, rec), std::invalid_argument);
}

TEST(Sweep, UnreachableThresholdRemovesEverything) {
    const Graph g = sbm_fixture(10);
    ModelConfig cfg;
    cfg.epochs = 0;
    const std::vector<double> mu{1e9};
    const std::vector<std::size_t> T{4};
    const auto rows = sparsity_sweep(g, cfg, mu, T);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].removal_ratio, 1.0);
}

TEST(Sweep, ZeroThresholdIsGridMinimum) {
    const Graph g = sbm_fixture(10);
    ModelConfig cfg;
    cfg.epochs = 0;
    const std::vector<double> mu{0.0, 0.5, 2.0, 1e9};
    const std::vector<std::size_t> T{4};
    const auto rows = sparsity_sweep(g, cfg, mu, T);
    for (const auto& r : rows) EXPECT_LE(rows[0].removal_ratio, r.removal_ratio);
}

TEST(Sweep, SinglePointMatchesTrainAndEvaluate) {
    const Graph g = sbm_fixture(11);
    ModelConfig cfg;
    cfg.epochs = 5;
    cfg.mu = 0.7;
    cfg.T = 3;
    const std::vector<double> mu{0.7};
    const std::vector<std::size_t> T{3};
    const auto row = sparsity_sweep(g, cfg, mu, T).front();
    const auto trained = train(g, cfg);
    EXPECT_EQ(row.test_acc, evaluate(trained.params, g, g.masks().test, cfg));
}

TEST(Sweep, EmptyGridRejected) {
    const Graph g = sbm_fixture(12);
    EXPECT_THROW(sparsity_sweep(g, ModelConfig{}, std::vector<double>{}, std::vector<std::size_t>{4}), std::invalid_argument);
}
