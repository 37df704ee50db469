#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "jssp/net.hpp"
#include "jssp/trainer.hpp"

using namespace jssp;

namespace {

bool same_params(PolicyParams a, PolicyParams b) {
    auto ta = tensors(a), tb = tensors(b);
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (!std::equal(ta[i].data.begin(), ta[i].data.end(), tb[i].data.begin(), tb[i].data.end())) return false;
    return true;
}

}  // namespace

TEST(Init, DeterministicPerSeed) {
    EXPECT_TRUE(same_params(init_params(3), init_params(3)));
    EXPECT_FALSE(same_params(init_params(3), init_params(4)));
    for (const auto& layer : init_params(3).gin) EXPECT_EQ(layer.eps, 0.0);
}

TEST(Init, ShapesAndCount) {
    const auto p = init_params(0);
    EXPECT_EQ(p.layers(), kGinLayers);
    EXPECT_EQ(p.gin[0].hidden.w.rows(), kFeatureDim);
    EXPECT_EQ(p.actor_hidden.w.rows(), 2 * kHiddenDim);
    const std::size_t h = kHiddenDim, f = kFeatureDim;
    const std::size_t gin = (f * h + h + h * h + h + 1) + 2 * (h * h + h + h * h + h + 1);
    const std::size_t heads = (2 * h * h + h) + (h + 1) + (h * h + h) + (h + 1);
    EXPECT_EQ(parameter_count(p), gin + heads);
}

TEST(Forward, FiniteOnRandomGraphs) {
    const auto p = init_params(0);
    for (auto [j, m] : {std::pair{6, 6}, {20, 20}, {100, 20}}) {
        const auto inst = generate(j, m, 1);
        const auto g = build_graph(inst);
        const auto t = forward(g, features(reset(inst), g, horizon(inst)), p);
        EXPECT_EQ(t.logits.size(), inst.num_ops());
        EXPECT_TRUE(t.logits.allFinite());
        EXPECT_TRUE(std::isfinite(t.value));
    }
}

TEST(Encode, ZeroWeightsGiveZeroEmbeddings) {
    const auto p = PolicyParams::zeros();
    const auto inst = generate(3, 3, 1);
    const auto g = build_graph(inst);
    const auto h = encode(g, features(reset(inst), g, horizon(inst)), p);
    EXPECT_EQ(h.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encode, TwoNodeHandCheck) {
    // One op node and one machine node joined both ways; one GIN layer with
    // identity weights: h_v = tanh((1 + eps) x_v + x_u).
    auto p = PolicyParams::zeros(kFeatureDim, kFeatureDim, 1);
    p.gin[0].hidden.w = Matrix::Identity(kFeatureDim, kFeatureDim);
    p.gin[0].out.w = Matrix::Identity(kFeatureDim, kFeatureDim);
    const auto g = make_graph(1, 1, 1, {{0, 1, ArcKind::assignment}, {1, 0, ArcKind::assignment}});
    Matrix x(2, kFeatureDim);
    x << 1, 0, 0.5, 0, 0, 0, 1, 0, 0, 0.25;
    const auto h = encode(g, x, p);
    for (int c = 0; c < kFeatureDim; ++c) {
        EXPECT_DOUBLE_EQ(h(0, c), std::tanh(x(0, c) + x(1, c)));
        EXPECT_DOUBLE_EQ(h(1, c), std::tanh(x(0, c) + x(1, c)));
    }
    p.gin[0].eps = 0.5;
    const auto h2 = encode(g, x, p);
    EXPECT_DOUBLE_EQ(h2(0, 2), std::tanh(1.5 * 0.5 + 0.0));
    EXPECT_DOUBLE_EQ(h2(1, 4), std::tanh(1.5 * 0.25 + 0.0));
}

TEST(Encode, IsolatedNodeSeesOnlyItself) {
    const auto p = init_params(2);
    const auto g = make_graph(1, 1, 1, {});
    Matrix x(2, kFeatureDim);
    x << 1, 0, 0.4, 0, 0, 0, 1, 0, 0, 0.7;
    Matrix other = x;
    other.row(1) << 0, 1, 0, 0, 0.1;
    EXPECT_EQ(encode(g, x, p).row(0), encode(g, other, p).row(0));
}

TEST(Readout, Properties) {
    Matrix h(1, 3);
    h << 1, 2, 3;
    EXPECT_EQ(readout(h), h.row(0));
    Matrix two(2, 3);
    two << h, h;
    EXPECT_EQ(readout(two), 2 * h.row(0));

    // Disjoint union of a graph with itself doubles the pooled embedding.
    const auto p = init_params(5);
    const auto inst = generate(3, 2, 4);
    const auto g = build_graph(inst);
    const auto x = features(reset(inst), g, horizon(inst));
    const auto single = readout(encode(g, x, p));
    const int n = g.num_op_nodes, mc = g.num_mch_nodes;
    std::vector<Arc> arcs;
    auto remap = [&](int v, int copy) { return v < n ? v + copy * n : 2 * n + (v - n) + copy * mc; };
    for (int copy = 0; copy < 2; ++copy)
        for (const auto& a : g.arcs) arcs.push_back({remap(a.src, copy), remap(a.dst, copy), a.kind});
    const auto dg = make_graph(2 * n, 2 * mc, 2 * g.num_jobs, arcs);
    Matrix dx(2 * (n + mc), kFeatureDim);
    dx << x.topRows(n), x.topRows(n), x.bottomRows(mc), x.bottomRows(mc);
    EXPECT_LT((readout(encode(dg, dx, p)) - 2 * single).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MaskedSoftmax, Contract) {
    Vector logits(4);
    logits << 0.3, -2.0, 5.0, 1.0;
    const auto one = masked_softmax(logits, std::vector<char>{0, 1, 0, 0});
    EXPECT_EQ(one, (Vector(4) << 0, 1, 0, 0).finished());

    const auto uniform = masked_softmax(Vector::Constant(4, 2.5), std::vector<char>{1, 0, 1, 1});
    EXPECT_DOUBLE_EQ(uniform(0), 1.0 / 3.0);
    EXPECT_EQ(uniform(1), 0.0);

    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        Vector l(10);
        std::vector<char> mask(10);
        for (int i = 0; i < 10; ++i) {
            l(i) = rng.uniform(-50, 50);
            mask[static_cast<std::size_t>(i)] = rng.uniform01() < 0.5;
        }
        mask[static_cast<std::size_t>(trial % 10)] = 1;
        const auto pr = masked_softmax(l, mask);
        EXPECT_NEAR(pr.sum(), 1.0, 1e-12);
        for (int i = 0; i < 10; ++i)
            if (!mask[static_cast<std::size_t>(i)]) EXPECT_EQ(pr(i), 0.0);
    }
    EXPECT_THROW(masked_softmax(logits, std::vector<char>(4, 0)), ContractError);
}

TEST(Critic, ZeroWeightsGiveBias) {
    auto p = PolicyParams::zeros();
    p.critic_out.b(0) = 0.75;
    const auto inst = generate(4, 4, 2);
    const auto g = build_graph(inst);
    EXPECT_EQ(forward(g, features(reset(inst), g, horizon(inst)), p).value, 0.75);
}

TEST(Forward, PermutationEquivariance) {
    auto p = init_params(7);
    // Non-zero global weights so the pooled path is exercised too.
    Rng w(11);
    for (Eigen::Index i = 0; i < p.critic_hidden.w.size(); ++i) p.critic_hidden.w.data()[i] = w.uniform(-0.1, 0.1);
    for (Eigen::Index r = kHiddenDim; r < 2 * kHiddenDim; ++r)
        for (Eigen::Index c = 0; c < kHiddenDim; ++c) p.actor_hidden.w(r, c) = w.uniform(-0.1, 0.1);
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = generate(2 + trial % 5, 2 + trial % 4, rng.next_u64());
        const auto g = build_graph(inst, trial % 2 ? PrecedenceFlow::bidirectional : PrecedenceFlow::forward);
        auto s = reset(inst);
        for (int j = 0; j < inst.num_jobs(); j += 2) s.dispatch(inst.op(j, 0).flat);
        const auto x = features(s, g, horizon(inst));
        const auto base = forward(g, x, p);
        const auto r = fixtures::relabel(g, rng);
        const auto moved = forward(r.graph, fixtures::permute_rows(x, r.perm), p);
        for (int f = 0; f < inst.num_ops(); ++f)
            EXPECT_NEAR(moved.logits(r.perm[static_cast<std::size_t>(f)]), base.logits(f), 1e-10);
        EXPECT_NEAR(moved.value, base.value, 1e-10);
    }
}

TEST(Backward, MatchesFiniteDifferences) {
    TrainConfig cfg;
    cfg.num_jobs = 3;
    cfg.num_machines = 3;
    cfg.batch_episodes = 2;
    auto p = init_params(1);
    auto b = collect_rollout(init_params(2), random_sampler(cfg), cfg, 0);
    compute_gae(b, 1.0, 1.0);
    normalize_advantages(b);
    auto grads = p.zeros_like();
    ppo_loss(p, b, cfg, &grads);
    auto pt = tensors(p);
    auto gt = tensors(grads);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto ti = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pt.size()) - 1));
        const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pt[ti].data.size()) - 1));
        const double x = pt[ti].data[k], h = 1e-4;
        pt[ti].data[k] = x + h;
        const double up = ppo_loss(p, b, cfg).total;
        pt[ti].data[k] = x - h;
        const double down = ppo_loss(p, b, cfg).total;
        pt[ti].data[k] = x;
        const double fd = (up - down) / (2 * h), an = gt[ti].data[k];
        EXPECT_LE(std::abs(fd - an), 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-6})) << pt[ti].name << "[" << k << "]";
    }
}

TEST(Backward, MaskedLogitsPassNoGradient) {
    // A loss that reads only masked-out probabilities has zero gradient.
    const auto p = init_params(4);
    const auto inst = generate(3, 3, 5);
    const auto g = build_graph(inst);
    const auto s = reset(inst);
    const auto trace = forward(g, features(s, g, horizon(inst)), p);
    const auto mask = eligible_actions(s);
    const auto probs = masked_softmax(trace.logits, mask);
    Vector dlogits = Vector::Zero(trace.logits.size());
    // d/dlogit of sum of masked probabilities: those probabilities are constant zero.
    for (int i = 0; i < inst.num_ops(); ++i)
        if (!mask[static_cast<std::size_t>(i)]) EXPECT_EQ(probs(i), 0.0);
    auto grads = p.zeros_like();
    backward(trace, p, dlogits, 0.0, grads);
    for (const auto& t : tensors(grads))
        for (double v : t.data) EXPECT_EQ(v, 0.0);
}

TEST(Checkpoint, RoundTrip) {
    auto p = init_params(9, 16, 2, PrecedenceFlow::bidirectional);
    p.gin[1].eps = 0.125;
    const auto j = checkpoint_to_json(p, {{"note", "x"}});
    const auto back = checkpoint_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_TRUE(same_params(p, back));
    EXPECT_EQ(back.flow, PrecedenceFlow::bidirectional);
    EXPECT_EQ(back.hidden_dim, 16);
    EXPECT_EQ(j["metadata"]["note"], "x");
}

TEST(Checkpoint, RejectsBadFiles) {
    const auto good = checkpoint_to_json(init_params(1, 8, 1));
    auto version = good;
    version["format_version"] = 99;
    EXPECT_THROW(checkpoint_from_json(version), CheckpointError);
    auto dims = good;
    dims["dims"]["feature_dim"] = 7;
    EXPECT_THROW(checkpoint_from_json(dims), CheckpointError);
    auto actor = good;
    actor["dims"]["actor_input"] = 9;
    EXPECT_THROW(checkpoint_from_json(actor), CheckpointError);
    auto size = good;
    size["params"]["critic.out.b"] = {1.0, 2.0};
    EXPECT_THROW(checkpoint_from_json(size), CheckpointError);
    auto missing = good;
    missing["params"].erase("gin.0.eps");
    EXPECT_THROW(checkpoint_from_json(missing), CheckpointError);
    auto flow = good;
    flow["precedence_flow"] = "sideways";
    EXPECT_THROW(checkpoint_from_json(flow), CheckpointError);
}
