#ifndef JSSP_INSTANCE_HPP
#define JSSP_INSTANCE_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jssp/rng.hpp"

namespace jssp {

using Time = std::int64_t;

/// Raised for instance text that does not describe a valid square-routing
/// job shop. `line()` is 1-based; 0 means "end of input".
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}

    std::size_t line() const noexcept { return line_; }
    /// The message without the line prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

/// Operation address. `flat` enumerates operations row-major by (job, step).
struct OpId {
    int job = 0;
    int step = 0;
    int flat = 0;

    friend bool operator==(const OpId&, const OpId&) = default;
};

/// Immutable JSSP instance: every job visits every machine exactly once.
class Instance {
public:
    /// `machine` and `duration` are row-major num_jobs x num_machines.
    /// Throws std::invalid_argument when an invariant is violated.
    Instance(int num_jobs, int num_machines, std::vector<int> machines, std::vector<Time> durations)
        : num_jobs_(num_jobs),
          num_machines_(num_machines),
          machine_(std::move(machines)),
          duration_(std::move(durations)) {
        if (num_jobs < 1 || num_machines < 1)
            throw std::invalid_argument("instance needs at least one job and one machine");
        const auto n = static_cast<std::size_t>(num_jobs) * static_cast<std::size_t>(num_machines);
        if (machine_.size() != n || duration_.size() != n)
            throw std::invalid_argument("routing/duration matrices must be num_jobs x num_machines");
        std::vector<char> seen(static_cast<std::size_t>(num_machines));
        for (int j = 0; j < num_jobs; ++j) {
            std::fill(seen.begin(), seen.end(), 0);
            for (int k = 0; k < num_machines; ++k) {
                const int m = machine(j, k);
                if (m < 0 || m >= num_machines)
                    throw std::invalid_argument("job " + std::to_string(j) + ": machine index " +
                                                std::to_string(m) + " out of range");
                if (seen[static_cast<std::size_t>(m)])
                    throw std::invalid_argument("job " + std::to_string(j) + " visits machine " +
                                                std::to_string(m) + " twice");
                seen[static_cast<std::size_t>(m)] = 1;
                if (duration(j, k) < 1)
                    throw std::invalid_argument("job " + std::to_string(j) + ": non-positive duration");
            }
        }
    }

    int num_jobs() const noexcept { return num_jobs_; }
    int num_machines() const noexcept { return num_machines_; }
    int num_ops() const noexcept { return num_jobs_ * num_machines_; }

    int machine(int job, int step) const { return machine_[index(job, step)]; }
    Time duration(int job, int step) const { return duration_[index(job, step)]; }
    int machine(int flat) const { return machine_[static_cast<std::size_t>(flat)]; }
    Time duration(int flat) const { return duration_[static_cast<std::size_t>(flat)]; }

    OpId op(int job, int step) const noexcept { return {job, step, job * num_machines_ + step}; }
    OpId op(int flat) const noexcept { return {flat / num_machines_, flat % num_machines_, flat}; }

    const std::vector<int>& machines() const noexcept { return machine_; }
    const std::vector<Time>& durations() const noexcept { return duration_; }

    friend bool operator==(const Instance&, const Instance&) = default;

private:
    std::size_t index(int job, int step) const {
        return static_cast<std::size_t>(job) * static_cast<std::size_t>(num_machines_) +
               static_cast<std::size_t>(step);
    }

    int num_jobs_;
    int num_machines_;
    std::vector<int> machine_;
    std::vector<Time> duration_;
};

namespace detail {

struct TextLine {
    std::size_t number;
    std::vector<std::int64_t> values;
};

// Splits into numbered lines of integers, dropping blank and '#' lines.
inline std::vector<TextLine> integer_lines(std::string_view text) {
    std::vector<TextLine> out;
    std::size_t number = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++number;

        const auto first = line.find_first_not_of(" \t\r\f\v");
        if (first == std::string_view::npos || line[first] == '#') continue;

        TextLine parsed{number, {}};
        std::size_t pos = first;
        while (pos < line.size()) {
            const auto end = std::min(line.find_first_of(" \t\r\f\v", pos), line.size());
            std::int64_t v = 0;
            const auto token = line.substr(pos, end - pos);
            auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc{} || ptr != token.data() + token.size())
                throw ParseError(number, "expected an integer, got '" + std::string(token) + "'");
            parsed.values.push_back(v);
            pos = line.find_first_not_of(" \t\r\f\v", end);
            if (pos == std::string_view::npos) break;
        }
        out.push_back(std::move(parsed));
    }
    return out;
}

inline std::pair<int, int> parse_header(const std::vector<TextLine>& lines) {
    if (lines.empty()) throw ParseError(0, "missing 'J M' header");
    const auto& h = lines.front();
    if (h.values.size() != 2 || h.values[0] < 1 || h.values[1] < 1)
        throw ParseError(h.number, "header must be two positive counts 'J M'");
    return {static_cast<int>(h.values[0]), static_cast<int>(h.values[1])};
}

inline void check_row(const TextLine& row, std::size_t expected, const char* what) {
    if (row.values.size() != expected)
        throw ParseError(row.number, std::string(what) + ": expected " + std::to_string(expected) +
                                         " integers, got " + std::to_string(row.values.size()));
}

// Validates one job row as it is read so errors carry the right line number.
inline void check_job_row(std::size_t line, int num_machines, const int* machines, const Time* durations) {
    std::vector<char> seen(static_cast<std::size_t>(num_machines));
    for (int k = 0; k < num_machines; ++k) {
        const int m = machines[k];
        if (m < 0 || m >= num_machines)
            throw ParseError(line, "machine index " + std::to_string(m) + " out of range");
        if (seen[static_cast<std::size_t>(m)])
            throw ParseError(line, "job visits machine " + std::to_string(m) + " twice");
        seen[static_cast<std::size_t>(m)] = 1;
        if (durations[k] < 1) throw ParseError(line, "non-positive duration");
    }
}

}  // namespace detail

/// Standard format: header "J M", then J rows of 2M integers alternating
/// machine (0-indexed) and duration. '#' lines are comments.
inline Instance parse_standard(std::string_view text) {
    const auto lines = detail::integer_lines(text);
    const auto [jobs, machines] = detail::parse_header(lines);
    if (lines.size() != static_cast<std::size_t>(jobs) + 1)
        throw ParseError(lines.size() > 1 ? lines.back().number : lines.front().number,
                         "expected " + std::to_string(jobs) + " job rows, got " +
                             std::to_string(lines.size() - 1));

    std::vector<int> machine;
    std::vector<Time> duration;
    for (int j = 0; j < jobs; ++j) {
        const auto& row = lines[static_cast<std::size_t>(j) + 1];
        detail::check_row(row, 2 * static_cast<std::size_t>(machines), "job row");
        const auto offset = machine.size();
        for (int k = 0; k < machines; ++k) {
            machine.push_back(static_cast<int>(row.values[2 * static_cast<std::size_t>(k)]));
            duration.push_back(row.values[2 * static_cast<std::size_t>(k) + 1]);
        }
        detail::check_job_row(row.number, machines, machine.data() + offset, duration.data() + offset);
    }
    return Instance(jobs, machines, std::move(machine), std::move(duration));
}

/// Taillard distribution layout: header "J M", a J x M durations matrix, then a
/// J x M machines matrix with 1-indexed machines.
inline Instance parse_taillard(std::string_view text) {
    const auto lines = detail::integer_lines(text);
    const auto [jobs, machines] = detail::parse_header(lines);
    const auto rows = static_cast<std::size_t>(jobs);
    if (lines.size() != 2 * rows + 1)
        throw ParseError(lines.back().number, "expected " + std::to_string(2 * rows) +
                                                  " matrix rows, got " + std::to_string(lines.size() - 1));

    std::vector<int> machine;
    std::vector<Time> duration;
    for (std::size_t j = 0; j < rows; ++j) {
        const auto& row = lines[j + 1];
        detail::check_row(row, static_cast<std::size_t>(machines), "duration row");
        duration.insert(duration.end(), row.values.begin(), row.values.end());
    }
    for (std::size_t j = 0; j < rows; ++j) {
        const auto& row = lines[rows + j + 1];
        detail::check_row(row, static_cast<std::size_t>(machines), "machine row");
        const auto offset = machine.size();
        for (auto v : row.values) {
            if (v < 1) throw ParseError(row.number, "1-indexed machine expected, got " + std::to_string(v));
            machine.push_back(static_cast<int>(v - 1));
        }
        detail::check_job_row(row.number, machines, machine.data() + offset, duration.data() + offset);
    }
    return Instance(jobs, machines, std::move(machine), std::move(duration));
}

/// Random instance: independent uniform durations in [dur_lo, dur_hi] and an
/// independent uniform machine permutation per job. Pure in its arguments.
inline Instance generate(int num_jobs, int num_machines, std::uint64_t seed, Time dur_lo = 1, Time dur_hi = 99) {
    if (num_jobs < 1 || num_machines < 1) throw std::invalid_argument("generate: dimensions must be >= 1");
    if (dur_lo < 1 || dur_lo > dur_hi) throw std::invalid_argument("generate: need 1 <= dur_lo <= dur_hi");

    Rng rng(seed);
    const auto n = static_cast<std::size_t>(num_jobs) * static_cast<std::size_t>(num_machines);
    std::vector<int> machine(n);
    std::vector<Time> duration(n);
    for (int j = 0; j < num_jobs; ++j) {
        const auto row = static_cast<std::size_t>(j) * static_cast<std::size_t>(num_machines);
        for (int k = 0; k < num_machines; ++k) duration[row + static_cast<std::size_t>(k)] = rng.uniform_int(dur_lo, dur_hi);
        std::span<int> perm(machine.data() + row, static_cast<std::size_t>(num_machines));
        for (int k = 0; k < num_machines; ++k) perm[static_cast<std::size_t>(k)] = k;
        rng.shuffle(perm);
    }
    return Instance(num_jobs, num_machines, std::move(machine), std::move(duration));
}

/// Two-sided bound: max of the largest job workload and the largest machine
/// workload. Never exceeds the optimal makespan.
inline Time lower_bound(const Instance& inst) {
    Time best = 0;
    std::vector<Time> machine_load(static_cast<std::size_t>(inst.num_machines()), 0);
    for (int j = 0; j < inst.num_jobs(); ++j) {
        Time job_load = 0;
        for (int k = 0; k < inst.num_machines(); ++k) {
            job_load += inst.duration(j, k);
            machine_load[static_cast<std::size_t>(inst.machine(j, k))] += inst.duration(j, k);
        }
        best = std::max(best, job_load);
    }
    return std::max(best, *std::max_element(machine_load.begin(), machine_load.end()));
}

/// Standard-format text; parse_standard(serialize(x)) == x.
inline std::string serialize(const Instance& inst) {
    std::ostringstream out;
    out << inst.num_jobs() << ' ' << inst.num_machines() << '\n';
    for (int j = 0; j < inst.num_jobs(); ++j) {
        for (int k = 0; k < inst.num_machines(); ++k) {
            if (k) out << ' ';
            out << inst.machine(j, k) << ' ' << inst.duration(j, k);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace jssp

#endif  // JSSP_INSTANCE_HPP
