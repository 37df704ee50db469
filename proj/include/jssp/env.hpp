#ifndef JSSP_ENV_HPP
#define JSSP_ENV_HPP

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jssp/instance.hpp"

namespace jssp {

/// Thrown when a caller breaks an environment contract (ineligible dispatch,
/// terminal-only query on a partial schedule).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Reward scales. The dense shaping term is lambda_shape times the drop in
/// spread; the terminal term is lambda_term * LB / C_max.
struct RewardConfig {
    double lambda_term = 10.0;
    double lambda_shape = 1.0;
    bool shaping = true;

    /// Defaults with the shaping scale normalized by the instance horizon.
    static RewardConfig for_horizon(Time horizon, double lambda_term = 10.0, bool shaping = true) {
        return {lambda_term, 1.0 / static_cast<double>(horizon), shaping};
    }

    void validate() const {
        if (!(lambda_term > 0.0) || !(lambda_shape > 0.0))
            throw std::invalid_argument("reward scales must be strictly positive");
    }
};

/// Plain start/completion record of a (possibly partial) schedule. Unset
/// entries hold -1.
struct Schedule {
    std::vector<Time> start;
    std::vector<Time> completion;
};

/// Constructive schedule under construction. Holds a pointer to its
/// instance; the instance must outlive the state. Copies are independent.
class ScheduleState {
public:
    static constexpr Time kUnset = -1;

    explicit ScheduleState(const Instance& inst)
        : inst_(&inst),
          start_(static_cast<std::size_t>(inst.num_ops()), kUnset),
          completion_(static_cast<std::size_t>(inst.num_ops()), kUnset),
          clb_(static_cast<std::size_t>(inst.num_ops()), 0),
          machine_avail_(static_cast<std::size_t>(inst.num_machines()), 0),
          machine_done_(static_cast<std::size_t>(inst.num_machines()), 0),
          job_next_(static_cast<std::size_t>(inst.num_jobs()), 0) {
        sequence_.reserve(static_cast<std::size_t>(inst.num_ops()));
        for (int j = 0; j < inst.num_jobs(); ++j) refresh_job(j, 0);
        spread_ = compute_spread();
    }

    const Instance& instance() const noexcept { return *inst_; }

    bool scheduled(int flat) const { return start_[idx(flat)] != kUnset; }
    Time start(int flat) const { return start_[idx(flat)]; }
    Time completion(int flat) const { return completion_[idx(flat)]; }
    Time machine_avail(int machine) const { return machine_avail_[idx(machine)]; }
    int job_next(int job) const { return job_next_[idx(job)]; }
    int machine_done(int machine) const { return machine_done_[idx(machine)]; }
    int dispatched() const noexcept { return static_cast<int>(sequence_.size()); }
    bool terminal() const noexcept { return dispatched() == inst_->num_ops(); }
    const std::vector<int>& sequence() const noexcept { return sequence_; }

    /// Completion lower bound of every operation (maintained incrementally).
    const std::vector<Time>& clb() const noexcept { return clb_; }
    double spread() const noexcept { return spread_; }

    /// Ready time of a job: completion of its last scheduled op, or 0.
    Time job_ready(int job) const {
        const int k = job_next(job);
        return k == 0 ? 0 : completion(inst_->op(job, k - 1).flat);
    }

    bool eligible(int flat) const {
        if (flat < 0 || flat >= inst_->num_ops()) return false;
        const auto o = inst_->op(flat);
        return job_next(o.job) == o.step;
    }

    /// Dispatches `flat` at its earliest semi-active start. Irrevocable.
    void dispatch(int flat) {
        if (!eligible(flat)) throw ContractError("operation " + std::to_string(flat) + " is not eligible");
        const auto o = inst_->op(flat);
        const int m = inst_->machine(flat);
        const Time s = std::max(job_ready(o.job), machine_avail_[idx(m)]);
        const Time c = s + inst_->duration(flat);
        start_[idx(flat)] = s;
        completion_[idx(flat)] = c;
        machine_avail_[idx(m)] = c;
        ++machine_done_[idx(m)];
        ++job_next_[idx(o.job)];
        sequence_.push_back(flat);

        // Only this job's chain and the frontier ops waiting on machine m move.
        refresh_job(o.job, o.step);
        for (int j = 0; j < inst_->num_jobs(); ++j) {
            const int k = job_next_[idx(j)];
            if (j != o.job && k < inst_->num_machines() && inst_->machine(j, k) == m) refresh_job(j, k);
        }
        spread_ = compute_spread();
    }

    Schedule schedule() const { return {start_, completion_}; }

private:
    static std::size_t idx(int i) { return static_cast<std::size_t>(i); }

    void refresh_job(int job, int from_step) {
        const int machines = inst_->num_machines();
        Time prev = from_step == 0 ? 0 : clb_[idx(inst_->op(job, from_step - 1).flat)];
        const int next = job_next_[idx(job)];
        for (int k = from_step; k < machines; ++k) {
            const int f = inst_->op(job, k).flat;
            if (k < next) {
                prev = clb_[idx(f)] = completion_[idx(f)];
                continue;
            }
            Time base = prev;
            if (k == next) base = std::max(base, machine_avail_[idx(inst_->machine(f))]);
            prev = clb_[idx(f)] = base + inst_->duration(f);
        }
    }

    double compute_spread() const {
        const Time peak = *std::max_element(clb_.begin(), clb_.end());
        const double total = static_cast<double>(std::accumulate(clb_.begin(), clb_.end(), Time{0}));
        return static_cast<double>(peak) - total / static_cast<double>(clb_.size());
    }

    const Instance* inst_;
    std::vector<Time> start_;
    std::vector<Time> completion_;
    std::vector<Time> clb_;
    std::vector<Time> machine_avail_;
    std::vector<int> machine_done_;
    std::vector<int> job_next_;
    std::vector<int> sequence_;
    double spread_ = 0.0;
};

inline ScheduleState reset(const Instance& inst) { return ScheduleState(inst); }

/// Boolean mask over flat op ids: true for each job's next unscheduled op.
inline std::vector<char> eligible_actions(const ScheduleState& s) {
    const auto& inst = s.instance();
    std::vector<char> mask(static_cast<std::size_t>(inst.num_ops()), 0);
    for (int j = 0; j < inst.num_jobs(); ++j) {
        const int k = s.job_next(j);
        if (k < inst.num_machines()) mask[static_cast<std::size_t>(inst.op(j, k).flat)] = 1;
    }
    return mask;
}

inline Time clb(const ScheduleState& s, int flat) { return s.clb()[static_cast<std::size_t>(flat)]; }

/// Completion lower bounds recomputed from scratch; reference for the
/// incremental values the state maintains.
inline std::vector<Time> clb_full(const ScheduleState& s) {
    const auto& inst = s.instance();
    std::vector<Time> out(static_cast<std::size_t>(inst.num_ops()));
    for (int j = 0; j < inst.num_jobs(); ++j) {
        Time prev = 0;
        for (int k = 0; k < inst.num_machines(); ++k) {
            const int f = inst.op(j, k).flat;
            Time value;
            if (s.scheduled(f)) {
                value = s.completion(f);
            } else if (k == s.job_next(j)) {
                value = std::max(prev, s.machine_avail(inst.machine(f))) + inst.duration(f);
            } else {
                value = prev + inst.duration(f);
            }
            out[static_cast<std::size_t>(f)] = prev = value;
        }
    }
    return out;
}

inline double spread(const ScheduleState& s) { return s.spread(); }

inline Time makespan(const ScheduleState& s) {
    if (!s.terminal()) throw ContractError("makespan of a partial schedule");
    const auto& inst = s.instance();
    Time best = 0;
    for (int j = 0; j < inst.num_jobs(); ++j)
        best = std::max(best, s.completion(inst.op(j, inst.num_machines() - 1).flat));
    return best;
}

inline double terminal_reward(const ScheduleState& s, const RewardConfig& cfg) {
    if (!s.terminal()) throw ContractError("terminal reward of a partial schedule");
    return cfg.lambda_term * static_cast<double>(lower_bound(s.instance())) / static_cast<double>(makespan(s));
}

struct StepResult {
    double reward = 0.0;
    bool done = false;
};

/// One MDP transition. The terminal reward, when reached, is added to the
/// final shaping reward.
inline StepResult step(ScheduleState& s, int flat, const RewardConfig& cfg) {
    const double before = s.spread();
    s.dispatch(flat);
    StepResult r;
    if (cfg.shaping) r.reward = cfg.lambda_shape * (before - s.spread());
    r.done = s.terminal();
    if (r.done) r.reward += terminal_reward(s, cfg);
    return r;
}

/// Precedence, resource disjointness and completion = start + duration.
inline bool validate_schedule(const Instance& inst, const Schedule& sch) {
    const auto n = static_cast<std::size_t>(inst.num_ops());
    if (sch.start.size() != n || sch.completion.size() != n) return false;
    std::vector<std::vector<std::pair<Time, Time>>> on_machine(static_cast<std::size_t>(inst.num_machines()));
    for (int j = 0; j < inst.num_jobs(); ++j) {
        for (int k = 0; k < inst.num_machines(); ++k) {
            const auto f = static_cast<std::size_t>(inst.op(j, k).flat);
            if (sch.start[f] < 0 || sch.completion[f] != sch.start[f] + inst.duration(j, k)) return false;
            if (k > 0 && sch.start[f] < sch.completion[f - 1]) return false;
            on_machine[static_cast<std::size_t>(inst.machine(j, k))].emplace_back(sch.start[f], sch.completion[f]);
        }
    }
    for (auto& intervals : on_machine) {
        std::sort(intervals.begin(), intervals.end());
        for (std::size_t i = 1; i < intervals.size(); ++i)
            if (intervals[i].first < intervals[i - 1].second) return false;
    }
    return true;
}

inline bool validate_schedule(const Instance& inst, const ScheduleState& s) {
    return s.terminal() && validate_schedule(inst, s.schedule());
}

/// Every start equals max(job predecessor completion, completion of the
/// previous op on the same machine): no op can be left-shifted without
/// reordering a machine. Assumes a valid schedule.
inline bool is_semi_active(const Instance& inst, const Schedule& sch) {
    std::vector<std::vector<std::pair<Time, int>>> on_machine(static_cast<std::size_t>(inst.num_machines()));
    for (int f = 0; f < inst.num_ops(); ++f)
        on_machine[static_cast<std::size_t>(inst.machine(f))].emplace_back(sch.start[static_cast<std::size_t>(f)], f);
    std::vector<Time> machine_prev(static_cast<std::size_t>(inst.num_ops()), 0);
    for (auto& ops : on_machine) {
        std::sort(ops.begin(), ops.end());
        for (std::size_t i = 1; i < ops.size(); ++i)
            machine_prev[static_cast<std::size_t>(ops[i].second)] =
                sch.completion[static_cast<std::size_t>(ops[i - 1].second)];
    }
    for (int f = 0; f < inst.num_ops(); ++f) {
        const auto o = inst.op(f);
        const Time job_prev = o.step == 0 ? 0 : sch.completion[static_cast<std::size_t>(f - 1)];
        if (sch.start[static_cast<std::size_t>(f)] != std::max(job_prev, machine_prev[static_cast<std::size_t>(f)]))
            return false;
    }
    return true;
}

/// Export as a JSON array of {job, step, machine, start, completion} in flat
/// op order.
inline nlohmann::json schedule_to_json(const Instance& inst, const Schedule& sch) {
    auto out = nlohmann::json::array();
    for (int f = 0; f < inst.num_ops(); ++f) {
        const auto o = inst.op(f);
        out.push_back({{"job", o.job},
                       {"step", o.step},
                       {"machine", inst.machine(f)},
                       {"start", sch.start[static_cast<std::size_t>(f)]},
                       {"completion", sch.completion[static_cast<std::size_t>(f)]}});
    }
    return out;
}

inline Schedule schedule_from_json(const Instance& inst, const nlohmann::json& j) {
    Schedule sch{std::vector<Time>(static_cast<std::size_t>(inst.num_ops()), ScheduleState::kUnset),
                 std::vector<Time>(static_cast<std::size_t>(inst.num_ops()), ScheduleState::kUnset)};
    for (const auto& row : j) {
        const int job = row.at("job").get<int>();
        const int stp = row.at("step").get<int>();
        if (job < 0 || job >= inst.num_jobs() || stp < 0 || stp >= inst.num_machines())
            throw std::invalid_argument("schedule row out of range");
        const auto f = static_cast<std::size_t>(inst.op(job, stp).flat);
        sch.start[f] = row.at("start").get<Time>();
        sch.completion[f] = row.at("completion").get<Time>();
    }
    return sch;
}

}  // namespace jssp

#endif  // JSSP_ENV_HPP
