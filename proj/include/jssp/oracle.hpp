#ifndef JSSP_ORACLE_HPP
#define JSSP_ORACLE_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "jssp/dispatch.hpp"
#include "jssp/env.hpp"

namespace jssp {

class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(std::uint64_t explored, Time incumbent)
        : std::runtime_error("oracle node budget exhausted after " + std::to_string(explored) +
                             " nodes (best found " + std::to_string(incumbent) + ", not proven optimal)"),
          explored_(explored),
          incumbent_(incumbent) {}

    std::uint64_t explored() const noexcept { return explored_; }
    Time incumbent() const noexcept { return incumbent_; }

private:
    std::uint64_t explored_;
    Time incumbent_;
};

struct OracleResult {
    Time optimum = 0;
    std::vector<int> optimal_sequence;
    std::uint64_t explored = 0;
};

namespace detail {

struct StateKeyHash {
    std::size_t operator()(const std::vector<Time>& key) const noexcept {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (auto v : key) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
        return static_cast<std::size_t>(h);
    }
};

class Search {
public:
    Search(const Instance& inst, std::uint64_t budget) : inst_(inst), budget_(budget) {
        // Seed the incumbent with the best dispatching rule.
        for (auto rule : kAllRules) {
            auto r = run_rule(inst, rule);
            if (best_.optimal_sequence.empty() || r.makespan < best_.optimum) {
                best_.optimum = r.makespan;
                best_.optimal_sequence = r.sequence;
            }
        }
        job_work_.assign(static_cast<std::size_t>(inst.num_jobs()), 0);
        machine_work_.assign(static_cast<std::size_t>(inst.num_machines()), 0);
        for (int f = 0; f < inst.num_ops(); ++f) {
            job_work_[static_cast<std::size_t>(inst.op(f).job)] += inst.duration(f);
            machine_work_[static_cast<std::size_t>(inst.machine(f))] += inst.duration(f);
        }
    }

    OracleResult run() {
        auto s = reset(inst_);
        descend(s);
        best_.explored = explored_;
        return best_;
    }

private:
    // Future starts on a machine are never before its availability, and a
    // job's remaining ops run in sequence from its ready time.
    Time bound(const ScheduleState& s) const {
        Time b = 0;
        for (int j = 0; j < inst_.num_jobs(); ++j)
            b = std::max(b, s.job_ready(j) + job_work_[static_cast<std::size_t>(j)]);
        for (int m = 0; m < inst_.num_machines(); ++m)
            b = std::max(b, s.machine_avail(m) + machine_work_[static_cast<std::size_t>(m)]);
        return b;
    }

    std::vector<Time> key(const ScheduleState& s) const {
        std::vector<Time> k;
        k.reserve(static_cast<std::size_t>(2 * inst_.num_jobs() + inst_.num_machines()));
        for (int j = 0; j < inst_.num_jobs(); ++j) {
            k.push_back(s.job_next(j));
            k.push_back(s.job_ready(j));
        }
        for (int m = 0; m < inst_.num_machines(); ++m) k.push_back(s.machine_avail(m));
        return k;
    }

    void descend(ScheduleState& s) {
        if (++explored_ > budget_) throw BudgetExceeded(explored_ - 1, best_.optimum);
        if (s.terminal()) {
            const Time c = makespan(s);
            if (c < best_.optimum) {
                best_.optimum = c;
                best_.optimal_sequence = s.sequence();
            }
            return;
        }
        if (bound(s) >= best_.optimum) return;
        // Identical (progress, ready times, availabilities) have identical futures.
        if (!seen_.insert(key(s)).second) return;

        for (int j = 0; j < inst_.num_jobs(); ++j) {
            const int k = s.job_next(j);
            if (k == inst_.num_machines()) continue;
            const int f = inst_.op(j, k).flat;
            auto child = s;
            child.dispatch(f);
            adjust(f, -1);
            descend(child);
            adjust(f, +1);
        }
    }

    void adjust(int flat, int sign) {
        const Time p = sign * inst_.duration(flat);
        job_work_[static_cast<std::size_t>(inst_.op(flat).job)] += p;
        machine_work_[static_cast<std::size_t>(inst_.machine(flat))] += p;
    }

    const Instance& inst_;
    std::uint64_t budget_;
    std::uint64_t explored_ = 0;
    OracleResult best_;
    std::vector<Time> job_work_;      // unscheduled work per job along the current path
    std::vector<Time> machine_work_;  // unscheduled work per machine along the current path
    std::unordered_set<std::vector<Time>, StateKeyHash> seen_;
};

}  // namespace detail

/// Exact minimum makespan over all dispatch sequences of the constructive
/// environment (depth-first branch and bound). Throws BudgetExceeded rather
/// than returning an unproven answer.
inline OracleResult optimal_makespan(const Instance& inst, std::uint64_t node_budget = 10'000'000) {
    return detail::Search(inst, node_budget).run();
}

}  // namespace jssp

#endif  // JSSP_ORACLE_HPP
