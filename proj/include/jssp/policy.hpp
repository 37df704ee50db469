#ifndef JSSP_POLICY_HPP
#define JSSP_POLICY_HPP

#include <cmath>
#include <cstdint>

#include "jssp/dispatch.hpp"
#include "jssp/env.hpp"
#include "jssp/graph.hpp"
#include "jssp/net.hpp"
#include "jssp/rng.hpp"

namespace jssp {

/// Draws an index from a probability vector (zero entries never chosen).
inline int sample_index(const Vector& probs, Rng& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    int last = -1;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs(i) <= 0.0) continue;
        acc += probs(i);
        last = static_cast<int>(i);
        if (u < acc) return last;
    }
    return last;  // rounding left u just above the final cumulative sum
}

/// Highest-probability index; ties go to the lowest index.
inline int argmax_index(const Vector& probs) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < probs.size(); ++i)
        if (probs(i) > probs(best)) best = i;
    return static_cast<int>(best);
}

/// Rolls out the policy on one instance. Greedy decoding takes the argmax of
/// the masked policy; otherwise actions are sampled with `seed`.
inline SolveResult run_policy(const Instance& inst, const PolicyParams& params, bool greedy = true,
                              std::uint64_t seed = 0) {
    const auto graph = build_graph(inst, params.flow);
    const Time h = horizon(inst);
    Rng rng(seed);
    auto s = reset(inst);
    while (!s.terminal()) {
        const auto trace = forward(graph, features(s, graph, h), params);
        const auto probs = masked_softmax(trace.logits, eligible_actions(s));
        s.dispatch(greedy ? argmax_index(probs) : sample_index(probs, rng));
    }
    return {s.schedule(), s.sequence(), makespan(s)};
}

}  // namespace jssp

#endif  // JSSP_POLICY_HPP
