// ssonmf command-line front end: simulate, analyze, sweep, presets, schema.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ssonmf/config.hpp"
#include "ssonmf/error.hpp"
#include "ssonmf/harness.hpp"

namespace fs = std::filesystem;
using namespace ssonmf;
using ojson = nlohmann::ordered_json;

namespace {

struct Flags {
    std::string config_path;
    std::string preset;
    std::string input;
    std::string out;
    std::string method;
    std::string methods;
    std::string ranks;
    std::string criterion;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<int> rank;
    std::optional<int> trials;
    int verbose = 0;
    bool quiet = false;
};

void write_json(const ojson& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

std::vector<Method> split_methods(const std::string& list) {
    std::vector<Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(method_from_string(item));
    if (out.empty()) throw ConfigError("--methods needs at least one method");
    return out;
}

// Config file (or preset) first, then individual flags on top.
CliConfig resolve(const Flags& f) {
    nlohmann::json doc = nlohmann::json::object();
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw ConfigError("cannot open config file " + f.config_path);
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!doc.is_object()) throw ConfigError("config document must be an object");
    }
    if (!f.preset.empty()) doc["preset"] = f.preset;
    CliConfig cli = cli_config_from_json(doc);
    auto& e = cli.experiment;
    if (!f.input.empty()) {
        e.input_path = f.input;
        e.scenario = Scenario::file;
    }
    if (!f.out.empty()) cli.out_dir = f.out;
    if (!f.method.empty()) e.method = method_from_string(f.method);
    if (!f.methods.empty()) cli.methods = split_methods(f.methods);
    if (!f.ranks.empty()) e.ranks = parse_rank_range(f.ranks);
    if (!f.criterion.empty()) e.criterion = criterion_from_string(f.criterion);
    if (f.seed) e.base_seed = *f.seed;
    if (f.jobs) cli.jobs = *f.jobs;
    if (f.rank) cli.rank = *f.rank;
    if (f.trials) e.trials = *f.trials;
    if (f.quiet) cli.verbosity = 0;
    cli.verbosity += f.verbose;
    if (cli.jobs < 1) throw ConfigError("--jobs must be at least 1");
    return cli;
}

void log(const CliConfig& cli, int level, const std::string& msg) {
    if (cli.verbosity >= level) std::cerr << msg << '\n';
}

void cmd_simulate(const CliConfig& cli) {
    const auto& e = cli.experiment;
    if (e.scenario == Scenario::file) throw ConfigError("simulate needs a simulated scenario, not 'file'");
    e.validate();
    const SimulatedSignal sim = simulate(e);
    fs::create_directories(cli.out_dir);
    ojson files = ojson::array();
    auto save = [&](const Signal& s, const std::string& name) {
        save_wav(s, cli.out_dir / (name + ".wav"), WavEncoding::float32);
        save_csv(s, cli.out_dir / (name + ".csv"));
        files.push_back(name + ".wav");
        files.push_back(name + ".csv");
    };
    save(sim.mixed, "mixed");
    save(sim.soi, "soi");
    save(sim.gaussian, "gaussian");
    save(sim.impulsive, "impulsive");

    ojson m;
    m["command"] = "simulate";
    m["config"] = config_to_json(e);
    m["noise_seed"] = noise_seed(e.base_seed);
    m["samples"] = sim.mixed.size();
    m["sample_rate"] = sim.mixed.sample_rate();
    m["soi_onsets"] = soi_onsets(e.soi).size();
    m["files"] = files;
    write_json(m, cli.out_dir / "manifest.json");
    log(cli, 1, "wrote " + std::to_string(sim.mixed.size()) + " samples to " + cli.out_dir.string());
}

void cmd_analyze(const CliConfig& cli) {
    const auto& e = cli.experiment;
    if (cli.rank < 2) throw ConfigError("--rank must be at least 2");
    ExperimentConfig single = e;
    single.ranks = {cli.rank, cli.rank};
    const Experiment exp(single);
    const std::uint64_t seed = trial_seed(e.base_seed, cli.rank, 0);
    const TrialOutcome out = exp.run_trial(cli.rank, seed, true);

    fs::create_directories(cli.out_dir);
    ojson report;
    report["command"] = "analyze";
    report["method"] = to_string(e.method);
    report["rank"] = cli.rank;
    report["seed"] = seed;
    report["config"] = config_to_json(single);
    report["report"] = report_to_json(out.report);
    report["model"] = {{"objective", out.model.objective},
                       {"nonempty_columns", out.model.nonempty_columns()},
                       {"accepted_steps", out.model.accepted_steps},
                       {"iterations", out.model.iterations}};
    report["files"] = {"report.json", "filter.csv", "envelope.csv", "filtered.wav"};
    write_json(report, cli.out_dir / "report.json");
    export_filter_csv(out.report.filter, cli.out_dir / "filter.csv");
    export_envelope_csv(out.report.envelope, cli.out_dir / "envelope.csv");
    if (out.report.filtered) save_wav(*out.report.filtered, cli.out_dir / "filtered.wav", WavEncoding::float32);

    char line[160];
    std::snprintf(line, sizeof line, "%s rank %d: %s %.6g (raw %.6g), centroid %.1f Hz", to_string(e.method).c_str(),
                  cli.rank, to_string(e.criterion).c_str(), out.report.criterion_value(),
                  e.criterion == Criterion::kurtosis ? out.report.raw_kurtosis : out.report.raw_envsi,
                  band_centroid(out.report.filter));
    log(cli, 1, line);
}

void cmd_sweep(const CliConfig& cli) {
    std::vector<Method> methods = cli.methods;
    if (methods.empty()) methods.push_back(cli.experiment.method);
    cli.experiment.validate();

    // One signal and one decomposition cache per method; seeds come from the
    // same base so every method sees identical trial seeds.
    const Signal signal = build_signal(cli.experiment);
    fs::create_directories(cli.out_dir);
    ojson top;
    top["command"] = "sweep";
    top["config"] = config_to_json(cli.experiment);
    ojson results = ojson::array();
    for (Method m : methods) {
        ExperimentConfig c = cli.experiment;
        c.method = m;
        log(cli, 1, "sweep " + to_string(m) + " ranks " + std::to_string(c.ranks.first) + ".." +
                        std::to_string(c.ranks.last) + " x " + std::to_string(c.trials) + " trials");
        const Experiment exp(c, signal);
        const McResult r = rank_sweep(exp, cli.jobs);
        const fs::path dir = methods.size() == 1 ? cli.out_dir : cli.out_dir / to_string(m);
        export_report(r, dir);
        results.push_back({{"method", to_string(m)},
                           {"dir", methods.size() == 1 ? std::string(".") : to_string(m)},
                           {"best_rank", r.best_rank}});
        for (const auto& s : r.ranks) {
            char line[128];
            std::snprintf(line, sizeof line, "  rank %2d: median %.6g  ok %d  failed %d", s.rank, s.stats.median,
                          s.succeeded, s.failed);
            log(cli, 2, line);
        }
        log(cli, 1, "  best rank " + std::to_string(r.best_rank));
    }
    top["results"] = results;
    if (methods.size() > 1) write_json(top, cli.out_dir / "manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal band selection for local damage detection"};
    app.require_subcommand(1);
    Flags f;

    auto add_common = [&f](CLI::App* sub) {
        sub->add_option("--config", f.config_path, "JSON config document");
        sub->add_option("--preset", f.preset, "named scenario (see `ssonmf presets`)");
        sub->add_option("--seed", f.seed, "base seed");
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--method", f.method, "ss_onmf | onmfs | nmf_mu | sk");
        sub->add_option("--criterion", f.criterion, "kurtosis | envsi");
        sub->add_option("--input", f.input, "WAV or CSV signal (sets scenario=file)");
        sub->add_flag("-v,--verbose", f.verbose, "more progress output");
        sub->add_flag("-q,--quiet", f.quiet, "no progress output");
    };

    auto* sim = app.add_subcommand("simulate", "write a simulated signal and its components");
    add_common(sim);
    auto* ana = app.add_subcommand("analyze", "one pipeline pass at a fixed rank and seed");
    add_common(ana);
    ana->add_option("--rank", f.rank, "factorization rank");
    auto* sw = app.add_subcommand("sweep", "Monte-Carlo rank sweep");
    add_common(sw);
    sw->add_option("--ranks", f.ranks, "rank range a..b");
    sw->add_option("--trials", f.trials, "trials per rank");
    sw->add_option("--jobs", f.jobs, "worker threads (output does not depend on it)");
    sw->add_option("--methods", f.methods, "comma-separated list; results share seeds");
    app.add_subcommand("presets", "list preset names");
    app.add_subcommand("schema", "print the config document schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("presets")) {
            for (const auto& n : preset_names()) std::cout << n << '\n';
            return 0;
        }
        if (app.got_subcommand("schema")) {
            std::cout << config_schema().dump(2) << '\n';
            return 0;
        }
        const CliConfig cli = resolve(f);
        if (app.got_subcommand("simulate")) cmd_simulate(cli);
        else if (app.got_subcommand("analyze")) cmd_analyze(cli);
        else cmd_sweep(cli);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
