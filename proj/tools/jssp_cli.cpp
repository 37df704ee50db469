// Command-line front end: generate, train, solve, bench (and a hidden oracle).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jssp/jssp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GenerateArgs {
    std::vector<std::string> geometries;
    int count = 100;
    std::uint64_t seed = 0;
    std::string out;
    jssp::Time dur_lo = 1, dur_hi = 99;
};

struct TrainArgs {
    std::string config;
    std::string out;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> updates;
    std::optional<int> workers;
    std::optional<std::string> geometry;
    bool no_shaping = false;
    bool quiet = false;
};

struct SolveArgs {
    std::string instance;
    std::string format = "standard";
    std::string solver;
    bool sample = false;
    std::uint64_t seed = 0;
    std::string out;
};

struct BenchArgs {
    std::string manifest;
    std::vector<std::string> solvers;
    std::string bounds{jssp::BoundSource::kComputed};
    std::string out;
    int workers = 1;
    bool sample = false;
    std::uint64_t seed = 0;
};

struct OracleArgs {
    std::string instance;
    std::string format = "standard";
    std::uint64_t budget = 10'000'000;
};

int run_generate(const GenerateArgs& a) {
    std::vector<jssp::Geometry> geoms;
    for (const auto& g : a.geometries) geoms.push_back(jssp::parse_geometry(g));
    const auto m = jssp::cmd_generate(geoms, a.count, a.seed, a.out, a.dur_lo, a.dur_hi);
    std::cout << "wrote " << m.entries.size() << " instances and manifest.json to " << a.out << '\n';
    return 0;
}

jssp::TrainConfig train_config(const TrainArgs& a) {
    json j = json::object();
    if (!a.config.empty()) j = json::parse(jssp::read_file(a.config));
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        const auto key = kv.substr(0, eq);
        if (!json(jssp::TrainConfig{}).contains(key)) throw std::invalid_argument("unknown config field '" + key + "'");
        j[key] = json::parse(kv.substr(eq + 1));
    }
    if (a.seed) j["seed"] = *a.seed;
    if (a.updates) j["total_updates"] = *a.updates;
    if (a.workers) j["workers"] = *a.workers;
    if (a.geometry) {
        const auto g = jssp::parse_geometry(*a.geometry);
        j["num_jobs"] = g.num_jobs;
        j["num_machines"] = g.num_machines;
    }
    if (a.no_shaping) j["shaping"] = false;
    for (const auto& [key, value] : j.items())
        if (!json(jssp::TrainConfig{}).contains(key)) throw std::invalid_argument("unknown config field '" + key + "'");
    auto cfg = j.get<jssp::TrainConfig>();
    cfg.validate();
    return cfg;
}

int run_train(const TrainArgs& a) {
    const auto cfg = train_config(a);
    const auto out = jssp::cmd_train(cfg, a.out, a.quiet ? nullptr : &std::cerr);
    std::cout << "log: " << out.log.string() << "\nfinal: " << out.final_checkpoint.string()
              << "\nbest: " << out.best_checkpoint.string();
    if (out.result.best_update >= 0)
        std::cout << " (update " << out.result.best_update << ", validation mean makespan "
                  << out.result.best_validation << ")";
    std::cout << '\n';
    return 0;
}

int run_solve(const SolveArgs& a) {
    const auto inst = jssp::load_instance(a.instance, jssp::parse_format(a.format));
    const auto solver = jssp::resolve_solver(a.solver);
    const auto r = jssp::cmd_solve(inst, solver, !a.sample, a.seed);
    json doc{{"instance", fs::path(a.instance).filename().string()},
             {"solver", solver.id},
             {"decoding", solver.rule ? "rule" : (a.sample ? "sample" : "greedy")},
             {"makespan", r.result.makespan},
             {"lower_bound", jssp::lower_bound(inst)},
             {"schedule", r.schedule}};
    if (a.sample && !solver.rule) doc["seed"] = a.seed;
    if (a.out.empty())
        std::cout << doc.dump(2) << '\n';
    else {
        jssp::write_file(a.out, doc.dump(2) + "\n");
        std::cout << "makespan " << r.result.makespan << '\n';
    }
    return 0;
}

int run_bench(const BenchArgs& a) {
    const auto report = jssp::cmd_bench(a.manifest, a.solvers, a.bounds, a.out, {!a.sample, a.seed, a.workers});
    std::cout << jssp::summary_csv(report);
    if (report.failures > 0) {
        std::cerr << "FAILED: " << report.failures << " solver runs did not produce a valid schedule\n";
        return 1;
    }
    return 0;
}

int run_oracle(const OracleArgs& a) {
    const auto inst = jssp::load_instance(a.instance, jssp::parse_format(a.format));
    const auto r = jssp::optimal_makespan(inst, a.budget);
    json seq = json::array();
    for (int f : r.optimal_sequence) seq.push_back({inst.op(f).job, inst.op(f).step});
    std::cout << json{{"optimum", r.optimum}, {"explored", r.explored}, {"sequence", seq}}.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Job-shop scheduling: instance suites, PPO training, dispatching rules and benchmarks"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a seeded random instance suite plus manifest.json");
    g->add_option("-g,--geometry", gen.geometries, "Geometries as JxM, e.g. 6x6 20x20 100x20")->required();
    g->add_option("-n,--count", gen.count, "Instances per geometry")->capture_default_str();
    g->add_option("--seed", gen.seed, "Suite seed")->capture_default_str();
    g->add_option("--dur-lo", gen.dur_lo, "Smallest duration")->capture_default_str();
    g->add_option("--dur-hi", gen.dur_hi, "Largest duration")->capture_default_str();
    g->add_option("-o,--out", gen.out, "Output directory")->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a policy with PPO; writes train_log.csv and checkpoints");
    t->add_option("-c,--config", tr.config, "JSON config; keys are TrainConfig field names")->check(CLI::ExistingFile);
    t->add_option("-o,--out", tr.out, "Output directory")->required();
    t->add_option("--set", tr.sets, "Override a config field, key=value (JSON value); repeatable");
    t->add_option("--seed", tr.seed, "Override seed");
    t->add_option("--updates", tr.updates, "Override total_updates");
    t->add_option("--workers", tr.workers, "Rollout/validation threads (results do not depend on it)");
    t->add_option("--geometry", tr.geometry, "Override training geometry, JxM");
    t->add_flag("--no-shaping", tr.no_shaping, "Disable the dense spread reward (terminal reward only)");
    t->add_flag("-q,--quiet", tr.quiet, "No progress lines on stderr");

    SolveArgs so;
    auto* s = app.add_subcommand("solve", "Solve one instance with a rule or checkpoint; prints schedule JSON");
    s->add_option("instance", so.instance, "Instance file")->required()->check(CLI::ExistingFile);
    s->add_option("-f,--format", so.format, "standard or taillard")->capture_default_str();
    s->add_option("-s,--solver", so.solver, "mwkr, mor, fdd_mwr or ckpt:<path>")->required();
    auto* s_sample = s->add_flag("--sample", so.sample, "Sample actions with --seed instead of greedy argmax");
    s->add_flag("--greedy", "Greedy argmax decoding (default)")->excludes(s_sample);
    s->add_option("--seed", so.seed, "Sampling seed")->capture_default_str();
    s->add_option("-o,--out", so.out, "Write schedule JSON here instead of stdout");

    BenchArgs be;
    auto* b = app.add_subcommand("bench", "Run solvers over a suite; writes bench*.csv and bench.json");
    b->add_option("-m,--manifest", be.manifest, "Suite manifest.json")->required()->check(CLI::ExistingFile);
    b->add_option("-s,--solver", be.solvers, "Solvers: mwkr, mor, fdd_mwr, ckpt:<path>; repeatable")->required();
    b->add_option("-b,--bounds", be.bounds, "computed-lb or a CSV 'instance,lower_bound,...'")->capture_default_str();
    b->add_option("-o,--out", be.out, "Output directory")->required();
    b->add_option("-j,--workers", be.workers, "Threads (reports do not depend on it)")->capture_default_str();
    auto* b_sample = b->add_flag("--sample", be.sample, "Sample checkpoint policies with --seed instead of greedy");
    b->add_flag("--greedy", "Greedy argmax decoding for checkpoint solvers (default)")->excludes(b_sample);
    b->add_option("--seed", be.seed, "Sampling seed")->capture_default_str();

    OracleArgs orc;
    auto* o = app.add_subcommand("oracle", "Exact optimum of a tiny instance (branch and bound)");
    o->group("");
    o->add_option("instance", orc.instance, "Instance file")->required()->check(CLI::ExistingFile);
    o->add_option("-f,--format", orc.format, "standard or taillard")->capture_default_str();
    o->add_option("--budget", orc.budget, "Node budget")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*g) return run_generate(gen);
        if (*t) return run_train(tr);
        if (*s) return run_solve(so);
        if (*b) return run_bench(be);
        if (*o) return run_oracle(orc);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
