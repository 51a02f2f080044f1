#include <gtest/gtest.h>

#include <sstream>

#include "gsat/gsat.hpp"
#include "gsat/model/param_io.hpp"

using namespace gsat;

namespace {

using Edges = std::vector<std::pair<NodeId, NodeId>>;

Graph two_nodes() {
    const Edges e{{0, 1}, {0, 0}, {1, 1}};
    return Graph::build(2, e, DenseMatrix(2, 2), {0, 1}, 2);
}

Graph sbm_fixture(std::uint64_t seed) {
    Rng rng(seed);
    Graph g = sbm_generate({}, rng);
    return g.with_masks(split_nodes(g, SplitPolicy::copurchase(), rng));
}

Graph small_random_graph(std::size_t n, std::size_t d, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Edges e;
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j)
            if (rng.bernoulli(0.3)) e.emplace_back(i, j);
    DenseMatrix x(n, d);
    for (auto& v : x.data()) v = rng.uniform();
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(c));
    return add_self_loops(Graph::build(n, e, x, y, c));
}

LayerVars place(Tape& tape, const LayerParams& lp) {
    LayerVars lv;
    for (const auto& hp : lp.heads) {
        HeadVars hv{tape.constant(hp.weight), {}};
        for (const auto& a : hp.attention) hv.attention.push_back(tape.constant(a));
        lv.heads.push_back(hv);
    }
    return lv;
}

}  // namespace

TEST(Aggregate, IdentityPatternReturnsInput) {
    const Edges e{{0, 0}, {1, 1}, {2, 2}};
    const Graph g = Graph::build(3, e, DenseMatrix(3, 1), {0, 0, 0}, 1);
    const DenseMatrix h{{1, 2}, {3, 4}, {5, 6}};
    EXPECT_EQ(aggregate(EdgeAttention{std::vector<double>(3, 1.0)}, h, g), h);
}

TEST(Aggregate, ZeroAttentionGivesActivationOfZero) {
    const Graph g = two_nodes();
    const DenseMatrix h{{1, 2}, {3, 4}};
    EXPECT_EQ(aggregate(EdgeAttention{std::vector<double>(4, 0.0)}, h, g, ad::Activation::elu), DenseMatrix(2, 2));
}

TEST(Aggregate, HandExample) {
    const Graph g = two_nodes();
    EdgeAttention a{std::vector<double>(4, 0.0)};
    a.coefficients[g.slot(0, 1)] = 0.5;
    a.coefficients[g.slot(0, 0)] = 0.5;
    const auto out = aggregate(a, DenseMatrix{{2, 0}, {0, 2}}, g);
    EXPECT_DOUBLE_EQ(out(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(out(0, 1), 1.0);
}

TEST(LayerConfig, Widths) {
    LayerConfig concat{8, 4, 2, HeadCombine::concat, AttentionKind::spiking, ad::Activation::elu};
    EXPECT_EQ(concat.output_width(), 8u);
    LayerConfig avg = concat;
    avg.head_combine = HeadCombine::average;
    EXPECT_EQ(avg.output_width(), 4u);
}

TEST(ModelConfig, FinalWidthIsClassCount) {
    ModelConfig cfg;
    const auto layers = cfg.layers(10, 3);
    ASSERT_EQ(layers.size(), 2u);
    EXPECT_EQ(layers[0].output_width(), 64u);
    EXPECT_EQ(layers[1].in_dim, 64u);
    EXPECT_EQ(layers[1].output_width(), 3u);
}

TEST(ModelConfig, JsonRoundTrip) {
    ModelConfig cfg;
    cfg.attention = AttentionKind::baseline;
    cfg.mu = 1.25;
    cfg.T = 3;
    cfg.reset = ResetMode::unconditional;
    cfg.surrogate.kind = SurrogateKind::sigmoid;
    cfg.seed = 77;
    const nlohmann::json j = cfg;
    const auto back = j.get<ModelConfig>();
    EXPECT_EQ(nlohmann::json(back), j);
}

class MultiHead : public ::testing::TestWithParam<AttentionKind> {};

TEST_P(MultiHead, ConcatWidth) {
    const Graph g = small_random_graph(8, 5, 2, 1);
    ModelConfig cfg;
    cfg.attention = GetParam();
    LayerConfig layer{5, 4, 2, HeadCombine::concat, GetParam(), ad::Activation::elu};
    ModelConfig one_layer = cfg;
    one_layer.heads = 2;
    one_layer.hidden = 4;
    Rng init(3);
    const auto params = init_params(one_layer, 5, 2, init);
    Tape tape;
    std::vector<Rng> rngs{Rng(1), Rng(2)};
    const LayerContext ctx{g, cfg, rngs};
    const Var out = multi_head_forward(tape, tape.constant(g.features()), layer, place(tape, params.layers[0]), ctx);
    EXPECT_EQ(tape.value(out).cols(), 8u);
    EXPECT_EQ(tape.value(out).rows(), 8u);
}

TEST_P(MultiHead, SingleHeadConcatEqualsAverage) {
    const Graph g = small_random_graph(8, 5, 2, 2);
    ModelConfig cfg;
    cfg.attention = GetParam();
    cfg.heads = 1;
    cfg.hidden = 4;
    Rng init(4);
    const auto params = init_params(cfg, 5, 2, init);
    auto run = [&](HeadCombine combine) {
        LayerConfig layer{5, 4, 1, combine, GetParam(), ad::Activation::elu};
        Tape tape;
        std::vector<Rng> rngs{Rng(9)};
        const LayerContext ctx{g, cfg, rngs};
        return tape.value(multi_head_forward(tape, tape.constant(g.features()), layer, place(tape, params.layers[0]), ctx));
    };
    EXPECT_EQ(run(HeadCombine::concat), run(HeadCombine::average));
}

TEST_P(MultiHead, IdenticalHeadsGiveIdenticalHalves) {
    const Graph g = small_random_graph(10, 5, 2, 3);
    ModelConfig cfg;
    cfg.attention = GetParam();
    cfg.heads = 1;
    cfg.hidden = 4;
    Rng init(5);
    auto params = init_params(cfg, 5, 2, init);
    LayerParams doubled;
    doubled.heads = {params.layers[0].heads[0], params.layers[0].heads[0]};
    LayerConfig layer{5, 4, 2, HeadCombine::concat, GetParam(), ad::Activation::elu};
    Tape tape;
    std::vector<Rng> rngs{Rng(21), Rng(21)};
    const LayerContext ctx{g, cfg, rngs};
    const auto out = tape.value(multi_head_forward(tape, tape.constant(g.features()), layer, place(tape, doubled), ctx));
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(out(i, k), out(i, 4 + k));
}

INSTANTIATE_TEST_SUITE_P(BothKinds, MultiHead, ::testing::Values(AttentionKind::spiking, AttentionKind::baseline));

TEST(Params, UnflattenRoundTrip) {
    ModelConfig cfg;
    Rng rng(1);
    const auto p = init_params(cfg, 6, 3, rng);
    EXPECT_EQ(unflatten_params(cfg, 6, 3, p.flatten()), p);
    auto flat = p.flatten();
    flat.pop_back();
    EXPECT_THROW(unflatten_params(cfg, 6, 3, flat), std::invalid_argument);
}

TEST(Params, SpikingShapes) {
    ModelConfig cfg;
    cfg.T = 5;
    Rng rng(2);
    const auto p = init_params(cfg, 6, 3, rng);
    ASSERT_EQ(p.layers[0].heads.size(), 8u);
    EXPECT_EQ(p.layers[0].heads[0].attention.size(), 5u);
    EXPECT_EQ(p.layers[0].heads[0].attention[0].rows(), 8u);
    EXPECT_EQ(p.layers[0].heads[0].attention[0].cols(), 2u);
    cfg.share_theta = true;
    Rng rng2(2);
    EXPECT_EQ(init_params(cfg, 6, 3, rng2).layers[0].heads[0].attention.size(), 1u);
}

TEST(Params, InitOfWeightsIndependentOfT) {
    ModelConfig a, b;
    a.T = 2;
    b.T = 16;
    Rng ra(3), rb(3);
    const auto pa = init_params(a, 6, 3, ra), pb = init_params(b, 6, 3, rb);
    EXPECT_EQ(pa.layers[1].heads[7].weight, pb.layers[1].heads[7].weight);
    EXPECT_EQ(pa.layers[0].heads[2].attention[1], pb.layers[0].heads[2].attention[1]);
}

TEST(ParamFile, RoundTripAtFloatPrecision) {
    ModelConfig cfg;
    Rng rng(4);
    const auto p = init_params(cfg, 6, 3, rng);
    std::stringstream buf;
    write_params(buf, p.flatten());
    const auto back = read_params(buf);
    const auto flat = p.flatten();
    ASSERT_EQ(back.size(), flat.size());
    for (std::size_t k = 0; k < flat.size(); ++k) {
        ASSERT_TRUE(back[k].same_shape(flat[k]));
        for (std::size_t i = 0; i < flat[k].size(); ++i)
            EXPECT_EQ(back[k].data()[i], static_cast<double>(static_cast<float>(flat[k].data()[i])));
    }
}

TEST(ParamFile, HeaderLayout) {
    std::stringstream buf;
    write_params(buf, {DenseMatrix{{1.0, -2.0}}});
    const std::string s = buf.str();
    ASSERT_EQ(s.size(), 4u + 4 + 4 + 8 + 8);
    EXPECT_EQ(s.substr(0, 4), "GSAT");
    EXPECT_EQ(static_cast<unsigned char>(s[4]), 1);  // version, little-endian
    EXPECT_EQ(static_cast<unsigned char>(s[8]), 1);  // tensor count
    EXPECT_EQ(static_cast<unsigned char>(s[12]), 1); // rows
    EXPECT_EQ(static_cast<unsigned char>(s[16]), 2); // cols
    // 1.0f = 0x3F800000
    EXPECT_EQ(static_cast<unsigned char>(s[23]), 0x3F);
    EXPECT_EQ(static_cast<unsigned char>(s[22]), 0x80);
}

TEST(ParamFile, BadMagicRejected) {
    std::stringstream buf("XXXX");
    EXPECT_THROW(read_params(buf), std::runtime_error);
}

TEST(Train, ZeroEpochsReturnsInitialization) {
    const Graph g = sbm_fixture(100);
    ModelConfig cfg;
    cfg.epochs = 0;
    const auto r = train(g, cfg);
    Rng init = Rng(cfg.seed).split(1);
    EXPECT_EQ(r.params, init_params(cfg, g.feature_dim(), g.num_classes(), init));
    EXPECT_TRUE(r.log.empty());
    EXPECT_EQ(r.best_epoch, 0u);
}

TEST(Train, SameSeedIdenticalLogs) {
    const Graph g = sbm_fixture(101);
    ModelConfig cfg;
    cfg.epochs = 5;
    const auto a = train(g, cfg), b = train(g, cfg);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t k = 0; k < a.log.size(); ++k) EXPECT_EQ(nlohmann::json(a.log[k]).dump(), nlohmann::json(b.log[k]).dump());
    EXPECT_EQ(a.params, b.params);
}

TEST(Train, LossDecreasesOnSbm) {
    for (const std::uint64_t seed : {100, 101, 102}) {
        for (const auto kind : {AttentionKind::spiking, AttentionKind::baseline}) {
            const Graph g = sbm_fixture(seed);
            ModelConfig cfg;
            cfg.attention = kind;
            cfg.seed = seed;
            cfg.epochs = 50;
            cfg.patience = 1000;
            const auto r = train(g, cfg);
            ASSERT_EQ(r.log.size(), 50u);
            EXPECT_LT(r.log[49].train_loss, r.log[0].train_loss) << "seed " << seed << " " << to_string(kind);
        }
    }
}

TEST(Train, EmptyTrainMaskRejected) {
    Rng rng(1);
    const Graph g = sbm_generate({}, rng);
    EXPECT_THROW(train(g, ModelConfig{}), std::invalid_argument);
}

TEST(Evaluate, AccuracyExamples) {
    const std::vector<int> labels{0, 1, 1, 0};
    const Mask all{1, 1, 1, 1};
    EXPECT_EQ(accuracy(labels, labels, all), 1.0);
    const std::vector<int> flipped{1, 0, 0, 1};
    EXPECT_EQ(accuracy(flipped, labels, all), 0.0);
    EXPECT_THROW(accuracy(labels, labels, Mask(4, 0)), std::invalid_argument);
}

TEST(Evaluate, EmptyMaskRejected) {
    const Graph g = sbm_fixture(100);
    ModelConfig cfg;
    Rng rng(1);
    const auto p = init_params(cfg, g.feature_dim(), g.num_classes(), rng);
    EXPECT_THROW(evaluate(p, g, Mask(g.num_nodes(), 0), cfg), std::invalid_argument);
}

TEST(Evaluate, DeterministicAcrossCalls) {
    const Graph g = sbm_fixture(100);
    ModelConfig cfg;
    cfg.eval_passes = 3;
    Rng rng(1);
    const auto p = init_params(cfg, g.feature_dim(), g.num_classes(), rng);
    EXPECT_EQ(evaluate(p, g, g.masks().test, cfg), evaluate(p, g, g.masks().test, cfg));
}

TEST(RemovalRatio, Examples) {
    const Edges e{{0, 1}, {1, 2}, {0, 0}};
    const Graph g = Graph::build(3, e, DenseMatrix(3, 1), {0, 0, 0}, 1);
    // 4 non-loop slots.
    EXPECT_EQ(edge_removal_ratio(EdgeAttention{std::vector<double>(g.num_edge_slots(), 0.3)}, g), 0.0);
    EXPECT_EQ(edge_removal_ratio(EdgeAttention{std::vector<double>(g.num_edge_slots(), 0.0)}, g), 1.0);
}

TEST(RemovalRatio, ThreeOfTen) {
    Edges e;
    for (NodeId i = 1; i <= 5; ++i) e.emplace_back(0, i);
    const Graph g = Graph::build(6, e, DenseMatrix(6, 1), std::vector<int>(6, 0), 1);
    EdgeAttention a{std::vector<double>(g.num_edge_slots(), 1.0)};
    a.coefficients[0] = a.coefficients[1] = a.coefficients[2] = 0.0;
    EXPECT_DOUBLE_EQ(edge_removal_ratio(a, g), 0.3);
}

TEST(FrozenAttention, ForwardUsesInjectedCoefficients) {
    const Graph g = small_random_graph(6, 3, 2, 8);
    ModelConfig cfg;
    cfg.heads = 1;
    cfg.output_heads = 1;
    Rng rng(1);
    const auto p = init_params(cfg, 3, 2, rng);
    FrozenAttention frozen(2, std::vector<EdgeAttention>(1, EdgeAttention{std::vector<double>(g.num_edge_slots(), 0.0)}));
    Tape tape;
    Rng fr(2);
    ForwardOptions opts;
    opts.frozen = &frozen;
    const auto out = model_forward(tape, p, cfg, g, fr, false, opts);
    // All-zero attention leaves the logits at zero, so every row is uniform.
    for (double v : tape.value(out.probs).data()) EXPECT_DOUBLE_EQ(v, 0.5);
}
