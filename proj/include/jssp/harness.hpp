#ifndef JSSP_HARNESS_HPP
#define JSSP_HARNESS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jssp/dispatch.hpp"
#include "jssp/env.hpp"
#include "jssp/instance.hpp"
#include "jssp/net.hpp"
#include "jssp/parallel.hpp"
#include "jssp/policy.hpp"
#include "jssp/trainer.hpp"

namespace jssp {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Geometry {
    int num_jobs = 0;
    int num_machines = 0;

    std::string label() const { return std::to_string(num_jobs) + "x" + std::to_string(num_machines); }
    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// Parses "JxM" (also "JXM"), e.g. "20x15".
inline Geometry parse_geometry(std::string_view text) {
    const auto x = text.find_first_of("xX");
    auto number = [&](std::string_view part) {
        int v = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size() || v < 1)
            throw std::invalid_argument("bad geometry '" + std::string(text) + "', expected JxM");
        return v;
    };
    if (x == std::string_view::npos) throw std::invalid_argument("bad geometry '" + std::string(text) + "', expected JxM");
    return {number(text.substr(0, x)), number(text.substr(x + 1))};
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

enum class InstanceFormat { standard, taillard };

inline InstanceFormat parse_format(std::string_view s) {
    if (s == "standard") return InstanceFormat::standard;
    if (s == "taillard") return InstanceFormat::taillard;
    throw std::invalid_argument("unknown instance format '" + std::string(s) + "'");
}

inline std::string_view format_name(InstanceFormat f) {
    return f == InstanceFormat::standard ? "standard" : "taillard";
}

inline Instance load_instance(const fs::path& path, InstanceFormat format) {
    const auto text = read_file(path);
    try {
        return format == InstanceFormat::standard ? parse_standard(text) : parse_taillard(text);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.detail());
    }
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteEntry {
    std::string file;  // relative to the manifest's directory
    InstanceFormat format = InstanceFormat::standard;
    Geometry geometry;
    std::optional<std::uint64_t> seed;  // absent for published instances

    /// Instance id used in reports: the file name without extension.
    std::string id() const { return fs::path(file).stem().string(); }
};

struct SuiteManifest {
    std::string rng_algorithm{kRngAlgorithm};
    std::optional<std::uint64_t> seed;
    Time dur_lo = 1;
    Time dur_hi = 99;
    std::vector<Geometry> geometries;
    std::vector<SuiteEntry> entries;
};

inline nlohmann::json manifest_to_json(const SuiteManifest& m) {
    nlohmann::json j;
    j["rng_algorithm"] = m.rng_algorithm;
    j["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
    j["duration_range"] = {m.dur_lo, m.dur_hi};
    j["geometries"] = nlohmann::json::array();
    for (const auto& g : m.geometries) j["geometries"].push_back(g.label());
    j["instances"] = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json row{{"file", e.file},
                           {"format", format_name(e.format)},
                           {"num_jobs", e.geometry.num_jobs},
                           {"num_machines", e.geometry.num_machines}};
        row["seed"] = e.seed ? nlohmann::json(*e.seed) : nlohmann::json(nullptr);
        j["instances"].push_back(std::move(row));
    }
    return j;
}

inline SuiteManifest manifest_from_json(const nlohmann::json& j) {
    SuiteManifest m;
    m.rng_algorithm = j.value("rng_algorithm", std::string{});
    if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("duration_range")) {
        m.dur_lo = j["duration_range"].at(0).get<Time>();
        m.dur_hi = j["duration_range"].at(1).get<Time>();
    }
    for (const auto& g : j.value("geometries", nlohmann::json::array())) m.geometries.push_back(parse_geometry(g.get<std::string>()));
    for (const auto& row : j.at("instances")) {
        SuiteEntry e;
        e.file = row.at("file").get<std::string>();
        e.format = parse_format(row.value("format", std::string("standard")));
        e.geometry = {row.at("num_jobs").get<int>(), row.at("num_machines").get<int>()};
        if (row.contains("seed") && !row["seed"].is_null()) e.seed = row["seed"].get<std::uint64_t>();
        m.entries.push_back(std::move(e));
    }
    return m;
}

inline SuiteManifest read_manifest(const fs::path& path) {
    try {
        return manifest_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": malformed manifest: " + e.what());
    }
}

struct SuiteInstance {
    std::string id;
    Geometry geometry;
    Instance instance;
};

/// Loads every instance a manifest lists and checks it against the recorded
/// dimensions.
inline std::vector<SuiteInstance> load_suite(const fs::path& manifest_path) {
    const auto m = read_manifest(manifest_path);
    const auto dir = manifest_path.parent_path();
    std::vector<SuiteInstance> out;
    for (const auto& e : m.entries) {
        auto inst = load_instance(dir / e.file, e.format);
        if (inst.num_jobs() != e.geometry.num_jobs || inst.num_machines() != e.geometry.num_machines)
            throw IoError(e.file + ": dimensions disagree with manifest");
        out.push_back({e.id(), e.geometry, std::move(inst)});
    }
    return out;
}

/// Instance seed of entry `index` of a geometry in a generated suite.
inline std::uint64_t suite_instance_seed(std::uint64_t seed, Geometry g, int index) {
    return derive_seed({seed, static_cast<std::uint64_t>(g.num_jobs), static_cast<std::uint64_t>(g.num_machines),
                        static_cast<std::uint64_t>(index)});
}

/// Writes count instances per geometry as "<J>x<M>_<index>.txt" plus
/// manifest.json into out_dir.
inline SuiteManifest cmd_generate(const std::vector<Geometry>& geometries, int count, std::uint64_t seed,
                                  const fs::path& out_dir, Time dur_lo = 1, Time dur_hi = 99) {
    if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
    SuiteManifest m;
    m.seed = seed;
    m.dur_lo = dur_lo;
    m.dur_hi = dur_hi;
    m.geometries = geometries;
    const int width = static_cast<int>(std::to_string(count - 1).size());
    for (const auto& g : geometries) {
        for (int i = 0; i < count; ++i) {
            std::string index = std::to_string(i);
            index.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(index.size()))), '0');
            SuiteEntry e{g.label() + "_" + index + ".txt", InstanceFormat::standard, g, suite_instance_seed(seed, g, i)};
            write_file(out_dir / e.file, serialize(generate(g.num_jobs, g.num_machines, *e.seed, dur_lo, dur_hi)));
            m.entries.push_back(std::move(e));
        }
    }
    write_file(out_dir / "manifest.json", manifest_to_json(m).dump(2) + "\n");
    return m;
}

// ---------------------------------------------------------------------------
// Solvers

/// A dispatching rule or a policy checkpoint, named by its command-line
/// spelling ("mwkr", "mor", "fdd_mwr", "ckpt:<path>").
struct Solver {
    std::string id;
    std::optional<Rule> rule;
    std::shared_ptr<const PolicyParams> params;

    SolveResult run(const Instance& inst, bool greedy = true, std::uint64_t seed = 0) const {
        return rule ? run_rule(inst, *rule) : run_policy(inst, *params, greedy, seed);
    }
};

inline PolicyParams load_checkpoint(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw CheckpointError(path.string() + ": not JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

inline Solver resolve_solver(std::string_view spec) {
    if (auto rule = parse_rule(spec)) return {std::string(rule->name()), rule, nullptr};
    if (spec.starts_with("ckpt:")) {
        auto params = std::make_shared<const PolicyParams>(load_checkpoint(fs::path(spec.substr(5))));
        return {std::string(spec), std::nullopt, std::move(params)};
    }
    throw std::invalid_argument("unknown solver '" + std::string(spec) + "' (mwkr, mor, fdd_mwr or ckpt:<path>)");
}

struct SolveOutput {
    SolveResult result;
    nlohmann::json schedule;  // env schedule export
};

/// Solves and re-validates. Throws ContractError if the schedule is invalid.
inline SolveOutput cmd_solve(const Instance& inst, const Solver& solver, bool greedy = true, std::uint64_t seed = 0) {
    auto r = solver.run(inst, greedy, seed);
    if (!validate_schedule(inst, r.schedule)) throw ContractError(solver.id + " produced an invalid schedule");
    auto j = schedule_to_json(inst, r.schedule);
    return {std::move(r), std::move(j)};
}

// ---------------------------------------------------------------------------
// Training

struct TrainOutputs {
    fs::path log;
    fs::path final_checkpoint;
    fs::path best_checkpoint;
    TrainResult result;
};

/// Run metadata stored with every checkpoint. Everything here is a function
/// of the config, so repeated runs write identical files.
inline nlohmann::json train_metadata(const TrainConfig& cfg) {
    auto config = nlohmann::json(cfg);
    config.erase("workers");  // affects speed only
    return {{"seed", cfg.seed},
            {"total_updates", cfg.total_updates},
            {"geometry", Geometry{cfg.num_jobs, cfg.num_machines}.label()},
            {"shaping", cfg.shaping},
            {"rng_algorithm", kRngAlgorithm},
            {"config", std::move(config)}};
}

/// Trains and writes train_log.csv, checkpoint_final.json,
/// checkpoint_best.json and, every checkpoint_interval updates,
/// checkpoint_<update>.json into out_dir.
inline TrainOutputs cmd_train(const TrainConfig& cfg, const fs::path& out_dir, std::ostream* progress = nullptr) {
    cfg.validate();
    fs::create_directories(out_dir);
    TrainOutputs out{out_dir / "train_log.csv", out_dir / "checkpoint_final.json", out_dir / "checkpoint_best.json", {}};
    std::ofstream log(out.log, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write " + out.log.string());
    log << kTrainLogHeader << '\n';

    const auto meta = train_metadata(cfg);
    TrainHooks hooks;
    hooks.on_update = [&](const LogRow& row) {
        log << format_log_row(row) << '\n';
        log.flush();
        if (progress && (row.update + 1) % 50 == 0)
            *progress << "update " << row.update + 1 << "/" << cfg.total_updates << " mean makespan "
                      << row.mean_makespan << '\n';
    };
    hooks.on_checkpoint = [&](int update, const PolicyParams& p) {
        auto m = meta;
        m["update"] = update;
        std::string name = std::to_string(update);
        name.insert(0, name.size() < 6 ? 6 - name.size() : 0, '0');
        write_file(out_dir / ("checkpoint_" + name + ".json"), checkpoint_to_json(p, m).dump() + "\n");
    };

    out.result = train(cfg, hooks);
    if (!log) throw IoError("write failed: " + out.log.string());

    auto final_meta = meta;
    final_meta["update"] = cfg.total_updates;
    write_file(out.final_checkpoint, checkpoint_to_json(out.result.final_params, final_meta).dump() + "\n");
    auto best_meta = meta;
    best_meta["update"] = out.result.best_update;
    best_meta["validation_mean_makespan"] = out.result.best_validation;
    write_file(out.best_checkpoint, checkpoint_to_json(out.result.best_params, best_meta).dump() + "\n");
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark

/// Reference bounds: the computed two-sided LB, or a CSV with columns
/// "instance,lower_bound[,...]" keyed by instance id. Instances missing from
/// the file fall back to the computed LB and are labelled as such.
class BoundSource {
public:
    static constexpr std::string_view kComputed = "computed-lb";

    BoundSource() = default;

    static BoundSource from_spec(std::string_view spec) {
        if (spec == kComputed) return {};
        return from_csv(fs::path(spec));
    }

    static BoundSource from_csv(const fs::path& path) {
        BoundSource b;
        b.label_ = path.filename().string();
        std::istringstream in(read_file(path));
        std::string line;
        std::size_t number = 0;
        while (std::getline(in, line)) {
            ++number;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#' || (number == 1 && line.starts_with("instance"))) continue;
            const auto c1 = line.find(',');
            if (c1 == std::string::npos) throw IoError(path.string() + ":" + std::to_string(number) + ": expected id,bound");
            const auto c2 = line.find(',', c1 + 1);
            const auto field = line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1);
            Time v = 0;
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || ptr != field.data() + field.size() || v < 1)
                throw IoError(path.string() + ":" + std::to_string(number) + ": bad bound '" + field + "'");
            b.bounds_[line.substr(0, c1)] = v;
        }
        return b;
    }

    /// (bound, label of where it came from)
    std::pair<Time, std::string> bound(const std::string& id, const Instance& inst) const {
        if (auto it = bounds_.find(id); it != bounds_.end()) return {it->second, label_};
        return {lower_bound(inst), std::string(kComputed)};
    }

private:
    std::string label_{kComputed};
    std::map<std::string, Time> bounds_;
};

struct BenchRow {
    std::string instance;
    Geometry geometry;
    std::string solver;
    bool ok = false;
    Time makespan = 0;
    Time bound = 0;
    std::string bound_source;
    double gap = 0.0;
    std::string error;  // set when !ok
    double wall_seconds = 0.0;
};

struct BenchAggregate {
    Geometry geometry;
    std::string solver;
    int count = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single instance
    double mean_gap = 0.0;
};

struct RatioRow {
    double ratio = 0.0;  // num_jobs / num_machines
    std::string solver;
    int count = 0;
    double mean_gap = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows;  // ordered by instance then solver
    std::vector<BenchAggregate> aggregates;
    std::vector<RatioRow> ratio_pivot;
    int failures = 0;
};

struct BenchOptions {
    bool greedy = true;
    std::uint64_t seed = 0;  // sampling seed for non-greedy policy decoding
    int workers = 1;
};

inline constexpr std::string_view kBenchHeader = "instance,geometry,solver,makespan,bound,bound_source,gap,status";
inline constexpr std::string_view kSummaryHeader = "geometry,solver,count,mean,std,mean_gap";
inline constexpr std::string_view kRatioHeader = "ratio,solver,count,mean_gap";

inline BenchReport run_bench(const std::vector<SuiteInstance>& suite, const std::vector<Solver>& solvers,
                             const BoundSource& bounds, const BenchOptions& opt = {}) {
    BenchReport report;
    const auto per = solvers.size();
    report.rows.resize(suite.size() * per);
    parallel_for(report.rows.size(), opt.workers, [&](std::size_t k) {
        const auto i = k / per, s = k % per;
        const auto& item = suite[i];
        auto& row = report.rows[k];
        row.instance = item.id;
        row.geometry = item.geometry;
        row.solver = solvers[s].id;
        std::tie(row.bound, row.bound_source) = bounds.bound(item.id, item.instance);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const auto r = solvers[s].run(item.instance, opt.greedy, derive_seed({opt.seed, i, s}));
            if (!validate_schedule(item.instance, r.schedule)) {
                row.error = "invalid schedule";
            } else {
                row.ok = true;
                row.makespan = r.makespan;
                row.gap = static_cast<double>(r.makespan - row.bound) / static_cast<double>(row.bound);
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    std::vector<std::string> geometry_order;
    std::map<std::pair<std::string, std::string>, std::vector<const BenchRow*>> by_geometry;
    std::map<std::pair<double, std::size_t>, std::vector<const BenchRow*>> by_ratio;
    for (std::size_t k = 0; k < report.rows.size(); ++k) {
        const auto& row = report.rows[k];
        if (!row.ok) {
            ++report.failures;
            continue;
        }
        const auto label = row.geometry.label();
        if (std::find(geometry_order.begin(), geometry_order.end(), label) == geometry_order.end())
            geometry_order.push_back(label);
        by_geometry[{label, row.solver}].push_back(&row);
        by_ratio[{static_cast<double>(row.geometry.num_jobs) / row.geometry.num_machines, k % per}].push_back(&row);
    }
    for (const auto& label : geometry_order) {
        for (const auto& solver : solvers) {
            auto it = by_geometry.find({label, solver.id});
            if (it == by_geometry.end()) continue;
            const auto& rows = it->second;
            BenchAggregate a{rows.front()->geometry, solver.id, static_cast<int>(rows.size()), 0, 0, 0};
            for (const auto* r : rows) {
                a.mean += static_cast<double>(r->makespan);
                a.mean_gap += r->gap;
            }
            a.mean /= a.count;
            a.mean_gap /= a.count;
            if (a.count > 1) {
                double ss = 0.0;
                for (const auto* r : rows) ss += (static_cast<double>(r->makespan) - a.mean) * (static_cast<double>(r->makespan) - a.mean);
                a.std = std::sqrt(ss / (a.count - 1));
            }
            report.aggregates.push_back(std::move(a));
        }
    }
    for (const auto& [key, rows] : by_ratio) {
        RatioRow r{key.first, solvers[key.second].id, static_cast<int>(rows.size()), 0.0};
        for (const auto* row : rows) r.mean_gap += row->gap;
        r.mean_gap /= r.count;
        report.ratio_pivot.push_back(std::move(r));
    }
    return report;
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

/// Per-instance CSV. Failed pairs appear as FAILED rows with empty numbers.
inline std::string bench_csv(const BenchReport& r) {
    std::string out(kBenchHeader);
    out += '\n';
    for (const auto& row : r.rows) {
        out += csv_field(row.instance) + ',' + row.geometry.label() + ',' + csv_field(row.solver) + ',';
        if (row.ok)
            out += std::to_string(row.makespan) + ',' + std::to_string(row.bound) + ',' + csv_field(row.bound_source) +
                   ',' + format_number(row.gap) + ",ok\n";
        else
            out += ",,,," + csv_field("FAILED: " + row.error) + '\n';
    }
    return out;
}

inline std::string summary_csv(const BenchReport& r) {
    std::string out(kSummaryHeader);
    out += '\n';
    for (const auto& a : r.aggregates)
        out += a.geometry.label() + ',' + csv_field(a.solver) + ',' + std::to_string(a.count) + ',' + format_number(a.mean) +
               ',' + format_number(a.std) + ',' + format_number(a.mean_gap) + '\n';
    return out;
}

inline std::string ratio_csv(const BenchReport& r) {
    std::string out(kRatioHeader);
    out += '\n';
    for (const auto& p : r.ratio_pivot)
        out += format_number(p.ratio) + ',' + csv_field(p.solver) + ',' + std::to_string(p.count) + ',' +
               format_number(p.mean_gap) + '\n';
    return out;
}

/// Wall times vary run to run, so they live apart from the reproducible
/// report files.
inline std::string timing_csv(const BenchReport& r) {
    std::string out = "instance,solver,wall_seconds\n";
    for (const auto& row : r.rows)
        out += csv_field(row.instance) + ',' + csv_field(row.solver) + ',' + format_number(row.wall_seconds) + '\n';
    return out;
}

inline nlohmann::json bench_json(const BenchReport& r) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json x{{"instance", row.instance}, {"geometry", row.geometry.label()}, {"solver", row.solver}};
        if (row.ok) {
            x["status"] = "ok";
            x["makespan"] = row.makespan;
            x["bound"] = row.bound;
            x["bound_source"] = row.bound_source;
            x["gap"] = row.gap;
        } else {
            x["status"] = "FAILED";
            x["error"] = row.error;
        }
        j["rows"].push_back(std::move(x));
    }
    j["aggregates"] = nlohmann::json::array();
    for (const auto& a : r.aggregates)
        j["aggregates"].push_back({{"geometry", a.geometry.label()},
                                   {"solver", a.solver},
                                   {"count", a.count},
                                   {"mean", a.mean},
                                   {"std", a.std},
                                   {"mean_gap", a.mean_gap}});
    j["ratio_pivot"] = nlohmann::json::array();
    for (const auto& p : r.ratio_pivot)
        j["ratio_pivot"].push_back({{"ratio", p.ratio}, {"solver", p.solver}, {"count", p.count}, {"mean_gap", p.mean_gap}});
    j["failures"] = r.failures;
    return j;
}

struct BenchFiles {
    fs::path csv, summary, ratio, json, timing;
};

inline BenchFiles bench_files(const fs::path& out_dir) {
    return {out_dir / "bench.csv", out_dir / "bench_summary.csv", out_dir / "bench_ratio.csv", out_dir / "bench.json",
            out_dir / "bench_timing.csv"};
}

/// Runs every solver on every manifest instance and writes the report files.
/// A report with failures is still written in full; check `failures`.
inline BenchReport cmd_bench(const fs::path& manifest, const std::vector<std::string>& solver_specs,
                             std::string_view bounds_spec, const fs::path& out_dir, const BenchOptions& opt = {}) {
    if (solver_specs.empty()) throw std::invalid_argument("bench: no solvers given");
    std::vector<Solver> solvers;
    for (const auto& s : solver_specs) solvers.push_back(resolve_solver(s));
    const auto bounds = BoundSource::from_spec(bounds_spec);
    const auto suite = load_suite(manifest);
    auto report = run_bench(suite, solvers, bounds, opt);

    const auto files = bench_files(out_dir);
    write_file(files.csv, bench_csv(report));
    write_file(files.summary, summary_csv(report));
    write_file(files.ratio, ratio_csv(report));
    write_file(files.json, bench_json(report).dump(2) + "\n");
    write_file(files.timing, timing_csv(report));
    return report;
}

}  // namespace jssp

#endif  // JSSP_HARNESS_HPP
