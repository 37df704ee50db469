#ifndef JSSP_GRAPH_HPP
#define JSSP_GRAPH_HPP

#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jssp/env.hpp"
#include "jssp/instance.hpp"

namespace jssp {

inline constexpr int kFeatureDim = 5;

/// Row-major dense matrix; one row per graph node.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

enum class ArcKind { precedence, assignment };

struct Arc {
    int src;
    int dst;
    ArcKind kind;
};

enum class PrecedenceFlow { forward, bidirectional };

/// Sparse operation/machine graph. Op nodes are [0, N) in flat order, machine
/// nodes are [N, N + M). Topology does not depend on the schedule state.
struct UnifiedGraph {
    int num_op_nodes = 0;
    int num_mch_nodes = 0;
    int num_jobs = 0;
    std::vector<Arc> arcs;  // precedence arcs first, then assignment arcs

    // In-neighbour lists in CSR form: sources of arcs into node v are
    // in_src[in_offset[v] .. in_offset[v + 1]).
    std::vector<int> in_offset;
    std::vector<int> in_src;

    int num_nodes() const noexcept { return num_op_nodes + num_mch_nodes; }

    std::size_t count(ArcKind kind) const {
        std::size_t n = 0;
        for (const auto& a : arcs) n += a.kind == kind;
        return n;
    }

    /// Undirected degree of a node: precedence neighbours plus assignment
    /// partners, each assignment pair counted once.
    int degree(int node) const {
        int d = 0;
        for (const auto& a : arcs) {
            if (a.kind == ArcKind::assignment) {
                d += a.src == node;
            } else {
                d += a.src == node || a.dst == node;
            }
        }
        return d;
    }
};

namespace detail {

inline void index_in_arcs(UnifiedGraph& g) {
    const auto nodes = static_cast<std::size_t>(g.num_nodes());
    g.in_offset.assign(nodes + 1, 0);
    for (const auto& a : g.arcs) ++g.in_offset[static_cast<std::size_t>(a.dst) + 1];
    for (std::size_t v = 0; v < nodes; ++v) g.in_offset[v + 1] += g.in_offset[v];
    g.in_src.resize(g.arcs.size());
    auto fill = g.in_offset;
    for (const auto& a : g.arcs) g.in_src[static_cast<std::size_t>(fill[static_cast<std::size_t>(a.dst)]++)] = a.src;
}

}  // namespace detail

/// Finalizes a graph assembled by hand (test fixtures, relabelled copies).
inline UnifiedGraph make_graph(int num_op_nodes, int num_mch_nodes, int num_jobs, std::vector<Arc> arcs) {
    UnifiedGraph g{num_op_nodes, num_mch_nodes, num_jobs, std::move(arcs), {}, {}};
    detail::index_in_arcs(g);
    return g;
}

inline UnifiedGraph build_graph(const Instance& inst, PrecedenceFlow flow = PrecedenceFlow::forward) {
    const int n = inst.num_ops();
    std::vector<Arc> arcs;
    arcs.reserve(static_cast<std::size_t>(3 * n));
    for (int j = 0; j < inst.num_jobs(); ++j) {
        for (int k = 0; k + 1 < inst.num_machines(); ++k) {
            const int u = inst.op(j, k).flat;
            arcs.push_back({u, u + 1, ArcKind::precedence});
            if (flow == PrecedenceFlow::bidirectional) arcs.push_back({u + 1, u, ArcKind::precedence});
        }
    }
    for (int f = 0; f < n; ++f) {
        const int m = n + inst.machine(f);
        arcs.push_back({f, m, ArcKind::assignment});
        arcs.push_back({m, f, ArcKind::assignment});
    }
    return make_graph(n, inst.num_machines(), inst.num_jobs(), std::move(arcs));
}

/// Normalizer for time-valued features; equals the instance lower bound.
inline Time horizon(const Instance& inst) { return lower_bound(inst); }

/// Node features, one row per node:
///   op:      [1, 0, clb / horizon, scheduled, 0]
///   machine: [0, 1, 0, 0, scheduled ops on machine / ops routed to machine]
inline Matrix features(const ScheduleState& s, const UnifiedGraph& g, Time h) {
    const auto& inst = s.instance();
    Matrix x = Matrix::Zero(g.num_nodes(), kFeatureDim);
    const double inv_h = 1.0 / static_cast<double>(h);
    for (int f = 0; f < g.num_op_nodes; ++f) {
        x(f, 0) = 1.0;
        x(f, 2) = static_cast<double>(clb(s, f)) * inv_h;
        x(f, 3) = s.scheduled(f) ? 1.0 : 0.0;
    }
    for (int m = 0; m < g.num_mch_nodes; ++m) {
        x(g.num_op_nodes + m, 1) = 1.0;
        x(g.num_op_nodes + m, 4) = static_cast<double>(s.machine_done(m)) / static_cast<double>(inst.num_jobs());
    }
    return x;
}

/// Edge-list debug dump, one "u v kind" line per arc.
inline std::string dump_edges(const UnifiedGraph& g) {
    std::ostringstream out;
    for (const auto& a : g.arcs)
        out << a.src << ' ' << a.dst << ' ' << (a.kind == ArcKind::precedence ? "prec" : "assign") << '\n';
    return out.str();
}

}  // namespace jssp

#endif  // JSSP_GRAPH_HPP
