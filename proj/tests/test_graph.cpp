#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "jssp/graph.hpp"

using namespace jssp;

TEST(BuildGraph, TwoJobsThreeMachines) {
    const Instance inst(2, 3, {0, 1, 2, 2, 0, 1}, {1, 2, 3, 4, 5, 6});
    const auto g = build_graph(inst);
    EXPECT_EQ(g.num_op_nodes, 6);
    EXPECT_EQ(g.num_mch_nodes, 3);
    EXPECT_EQ(g.count(ArcKind::precedence), 4u);
    EXPECT_EQ(g.count(ArcKind::assignment), 12u);
}

TEST(BuildGraph, SingleOp) {
    const auto g = build_graph(fixtures::one_by_one());
    EXPECT_EQ(g.count(ArcKind::precedence), 0u);
    EXPECT_EQ(g.count(ArcKind::assignment), 2u);
    EXPECT_EQ(dump_edges(g), "0 1 assign\n1 0 assign\n");
}

TEST(BuildGraph, ArcCountIsLinear) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const int j = 1 + static_cast<int>(rng.uniform_int(0, 19)), m = 1 + static_cast<int>(rng.uniform_int(0, 19));
        const auto inst = generate(j, m, rng.next_u64());
        const auto n = static_cast<std::size_t>(inst.num_ops());
        const auto g = build_graph(inst);
        EXPECT_EQ(g.arcs.size(), (n - static_cast<std::size_t>(j)) + 2 * n);
        EXPECT_EQ(g.in_src.size(), g.arcs.size());
        const auto bi = build_graph(inst, PrecedenceFlow::bidirectional);
        EXPECT_EQ(bi.count(ArcKind::precedence), 2 * (n - static_cast<std::size_t>(j)));
    }
    // Doubling N at a fixed J/M ratio at most doubles the arc count.
    const auto small = build_graph(generate(10, 10, 1)), big = build_graph(generate(20, 10, 1));
    EXPECT_LE(big.arcs.size(), 2 * small.arcs.size());
}

TEST(BuildGraph, TopologyOfTwoByTwo) {
    const auto g = build_graph(fixtures::two_by_two());
    EXPECT_EQ(dump_edges(g),
              "0 1 prec\n2 3 prec\n"
              "0 4 assign\n4 0 assign\n1 5 assign\n5 1 assign\n2 5 assign\n5 2 assign\n3 4 assign\n4 3 assign\n");
    // In-neighbours of machine node 4 (m0): O11 and O22.
    std::vector<int> in4(g.in_src.begin() + g.in_offset[4], g.in_src.begin() + g.in_offset[5]);
    EXPECT_EQ(in4, (std::vector<int>{0, 3}));
    EXPECT_EQ(g.degree(0), 2);  // O12 via precedence, m0
    EXPECT_EQ(g.degree(4), 2);
}

TEST(BuildGraph, PureFunctionOfInstance) {
    const auto inst = generate(5, 4, 2);
    EXPECT_EQ(dump_edges(build_graph(inst)), dump_edges(build_graph(generate(5, 4, 2))));
}

TEST(Horizon, IsLowerBound) {
    EXPECT_EQ(horizon(fixtures::two_by_two()), 7);
    EXPECT_EQ(horizon(fixtures::one_by_one()), 5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) EXPECT_GT(horizon(generate(3, 4, seed)), 0);
}

TEST(Features, ResetRows) {
    const auto inst = fixtures::two_by_two();
    const auto g = build_graph(inst);
    const auto s = reset(inst);
    const auto x = features(s, g, horizon(inst));
    ASSERT_EQ(x.rows(), 6);
    ASSERT_EQ(x.cols(), kFeatureDim);
    const double expected[] = {3.0 / 7.0, 5.0 / 7.0, 2.0 / 7.0, 6.0 / 7.0};
    for (int f = 0; f < 4; ++f) {
        EXPECT_EQ(x(f, 0), 1.0);
        EXPECT_EQ(x(f, 1), 0.0);
        EXPECT_DOUBLE_EQ(x(f, 2), expected[f]);
        EXPECT_EQ(x(f, 3), 0.0);
        EXPECT_EQ(x(f, 4), 0.0);
    }
    for (int m = 4; m < 6; ++m) {
        EXPECT_EQ(x.row(m), (RowVector(5) << 0, 1, 0, 0, 0).finished());
    }
}

TEST(Features, TerminalRows) {
    const auto inst = generate(4, 3, 6);
    const auto g = build_graph(inst);
    auto s = reset(inst);
    for (int f = 0; f < inst.num_ops(); ++f) s.dispatch(f);
    const auto x = features(s, g, horizon(inst));
    for (int f = 0; f < inst.num_ops(); ++f) {
        EXPECT_EQ(x(f, 3), 1.0);
        EXPECT_DOUBLE_EQ(x(f, 2), static_cast<double>(s.completion(f)) / static_cast<double>(horizon(inst)));
    }
    for (int m = 0; m < 3; ++m) EXPECT_EQ(x(inst.num_ops() + m, 4), 1.0);
}

TEST(Features, OneHotTypesAlways) {
    Rng rng(8);
    const auto inst = generate(5, 5, 3);
    const auto g = build_graph(inst);
    auto s = reset(inst);
    while (true) {
        const auto x = features(s, g, horizon(inst));
        for (Eigen::Index v = 0; v < x.rows(); ++v) {
            ASSERT_EQ(x(v, 0) + x(v, 1), 1.0);
            ASSERT_TRUE(x(v, 0) == 0.0 || x(v, 0) == 1.0);
        }
        if (s.terminal()) break;
        const auto mask = eligible_actions(s);
        int f = static_cast<int>(rng.uniform_int(0, inst.num_ops() - 1));
        while (!mask[static_cast<std::size_t>(f)]) f = (f + 1) % inst.num_ops();
        s.dispatch(f);
    }
}
