#ifndef JSSP_TESTS_FIXTURES_HPP
#define JSSP_TESTS_FIXTURES_HPP

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include <numeric>
#include <span>

#include "jssp/graph.hpp"
#include "jssp/instance.hpp"

namespace fixtures {

using jssp::Instance;
using jssp::Time;

// m = [[0,1],[1,0]], p = [[3,2],[2,4]]
inline Instance two_by_two() { return Instance(2, 2, {0, 1, 1, 0}, {3, 2, 2, 4}); }

inline Instance one_by_one(Time p = 5) { return Instance(1, 1, {0}, {p}); }

// Semi-active simulation written independently of the env module.
inline Time simulate(const Instance& inst, const std::vector<int>& jobs_in_order) {
    std::vector<Time> job_ready(static_cast<std::size_t>(inst.num_jobs()), 0);
    std::vector<Time> mach_ready(static_cast<std::size_t>(inst.num_machines()), 0);
    std::vector<int> step(static_cast<std::size_t>(inst.num_jobs()), 0);
    Time cmax = 0;
    for (int j : jobs_in_order) {
        const auto ju = static_cast<std::size_t>(j);
        const int k = step[ju]++;
        const auto m = static_cast<std::size_t>(inst.machine(j, k));
        const Time c = std::max(job_ready[ju], mach_ready[m]) + inst.duration(j, k);
        job_ready[ju] = mach_ready[m] = c;
        cmax = std::max(cmax, c);
    }
    return cmax;
}

// Calls fn on every interleaving of job indices (each job appears M times).
inline void for_each_interleaving(const Instance& inst, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> left(static_cast<std::size_t>(inst.num_jobs()), inst.num_machines());
    std::vector<int> seq;
    std::function<void()> rec = [&] {
        if (static_cast<int>(seq.size()) == inst.num_ops()) {
            fn(seq);
            return;
        }
        for (int j = 0; j < inst.num_jobs(); ++j) {
            if (!left[static_cast<std::size_t>(j)]) continue;
            --left[static_cast<std::size_t>(j)];
            seq.push_back(j);
            rec();
            seq.pop_back();
            ++left[static_cast<std::size_t>(j)];
        }
    };
    rec();
}

inline Time brute_force_optimum(const Instance& inst) {
    Time best = std::numeric_limits<Time>::max();
    for_each_interleaving(inst, [&](const std::vector<int>& seq) { best = std::min(best, simulate(inst, seq)); });
    return best;
}

// Every 2x2 instance with durations in {1,2,3}: 2 routings per job, 3^4 durations.
inline std::vector<Instance> all_two_by_two() {
    std::vector<Instance> out;
    const std::vector<std::vector<int>> routes = {{0, 1}, {1, 0}};
    for (const auto& r0 : routes)
        for (const auto& r1 : routes)
            for (int code = 0; code < 81; ++code) {
                std::vector<Time> p(4);
                int c = code;
                for (auto& v : p) {
                    v = 1 + c % 3;
                    c /= 3;
                }
                out.emplace_back(2, 2, std::vector<int>{r0[0], r0[1], r1[0], r1[1]}, p);
            }
    return out;
}

struct Relabeled {
    jssp::UnifiedGraph graph;
    std::vector<int> perm;  // old node -> new node
};

// Random relabeling that keeps op nodes first, as the encoder requires.
inline Relabeled relabel(const jssp::UnifiedGraph& g, jssp::Rng& rng) {
    std::vector<int> ops(static_cast<std::size_t>(g.num_op_nodes)), mchs(static_cast<std::size_t>(g.num_mch_nodes));
    std::iota(ops.begin(), ops.end(), 0);
    std::iota(mchs.begin(), mchs.end(), g.num_op_nodes);
    rng.shuffle(std::span<int>(ops));
    rng.shuffle(std::span<int>(mchs));
    std::vector<int> perm(ops);
    perm.insert(perm.end(), mchs.begin(), mchs.end());
    std::vector<jssp::Arc> arcs;
    for (const auto& a : g.arcs) arcs.push_back({perm[static_cast<std::size_t>(a.src)], perm[static_cast<std::size_t>(a.dst)], a.kind});
    rng.shuffle(std::span<jssp::Arc>(arcs));
    return {jssp::make_graph(g.num_op_nodes, g.num_mch_nodes, g.num_jobs, std::move(arcs)), perm};
}

inline jssp::Matrix permute_rows(const jssp::Matrix& x, const std::vector<int>& perm) {
    jssp::Matrix y(x.rows(), x.cols());
    for (Eigen::Index v = 0; v < x.rows(); ++v) y.row(perm[static_cast<std::size_t>(v)]) = x.row(v);
    return y;
}

}  // namespace fixtures

#endif  // JSSP_TESTS_FIXTURES_HPP
