#ifndef JSSP_DISPATCH_HPP
#define JSSP_DISPATCH_HPP

#include <algorithm>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "jssp/env.hpp"

namespace jssp {

enum class RuleId { mwkr, mor, fdd_mwr };

/// A priority dispatching rule. MWKR and MOR pick the largest priority,
/// FDD/MWR the smallest.
struct Rule {
    RuleId id;

    bool maximize() const noexcept { return id != RuleId::fdd_mwr; }

    std::string_view name() const noexcept {
        switch (id) {
            case RuleId::mwkr: return "mwkr";
            case RuleId::mor: return "mor";
            case RuleId::fdd_mwr: return "fdd_mwr";
        }
        return "?";
    }
};

inline constexpr Rule kMwkr{RuleId::mwkr};
inline constexpr Rule kMor{RuleId::mor};
inline constexpr Rule kFddMwr{RuleId::fdd_mwr};
inline constexpr Rule kAllRules[] = {kMwkr, kMor, kFddMwr};

/// Accepts "mwkr", "mor", "fdd_mwr", "fdd/mwr" or "fdd-mwr", any case.
inline std::optional<Rule> parse_rule(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::replace(s.begin(), s.end(), '/', '_');
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "mwkr") return kMwkr;
    if (s == "mor") return kMor;
    if (s == "fdd_mwr" || s == "fdd_mwkr") return kFddMwr;
    return std::nullopt;
}

namespace detail {

inline Time remaining_work(const ScheduleState& s, const OpId& o) {
    const auto& inst = s.instance();
    Time w = 0;
    for (int k = o.step; k < inst.num_machines(); ++k) w += inst.duration(o.job, k);
    return w;
}

}  // namespace detail

/// Priority of eligible op `flat`:
///   MWKR    - work left in the op's job, the op included
///   MOR     - operations left in the op's job, the op included
///   FDD/MWR - flow due date (job ready time + op duration) over MWKR
inline double priority(Rule rule, const ScheduleState& s, int flat) {
    const auto& inst = s.instance();
    const auto o = inst.op(flat);
    switch (rule.id) {
        case RuleId::mwkr: return static_cast<double>(detail::remaining_work(s, o));
        case RuleId::mor: return static_cast<double>(inst.num_machines() - o.step);
        case RuleId::fdd_mwr: {
            const Time due = s.job_ready(o.job) + inst.duration(flat);
            return static_cast<double>(due) / static_cast<double>(detail::remaining_work(s, o));
        }
    }
    throw std::invalid_argument("unknown rule");
}

/// Eligible op with the best priority; ties go to the lowest flat id.
inline int select(Rule rule, const ScheduleState& s) {
    const auto& inst = s.instance();
    int best = -1;
    double best_priority = 0.0;
    for (int j = 0; j < inst.num_jobs(); ++j) {
        const int k = s.job_next(j);
        if (k == inst.num_machines()) continue;
        const int f = inst.op(j, k).flat;
        const double pr = priority(rule, s, f);
        if (best < 0 || (rule.maximize() ? pr > best_priority : pr < best_priority)) {
            best = f;
            best_priority = pr;
        }
    }
    if (best < 0) throw ContractError("no eligible operation");
    return best;
}

struct SolveResult {
    Schedule schedule;
    std::vector<int> sequence;
    Time makespan = 0;
};

inline SolveResult run_rule(const Instance& inst, Rule rule) {
    auto s = reset(inst);
    while (!s.terminal()) s.dispatch(select(rule, s));
    return {s.schedule(), s.sequence(), makespan(s)};
}

}  // namespace jssp

#endif  // JSSP_DISPATCH_HPP
