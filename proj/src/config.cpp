#include "ssonmf/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "ssonmf/error.hpp"

namespace ssonmf {

namespace {

using json = nlohmann::json;
using Handler = std::function<void(const json&)>;

// Thrown by leaf setters; read_object adds the offending key.
struct BadValue : ConfigError {
    using ConfigError::ConfigError;
};

// Dispatches every key of `obj` to its handler; anything unlisted is an error.
void read_object(const json& obj, const std::string& where, const std::map<std::string, Handler>& handlers) {
    if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        const auto it = handlers.find(key);
        if (it == handlers.end()) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
        try {
            it->second(value);
        } catch (const BadValue& e) {
            throw ConfigError("invalid value for '" + where + "." + key + "': " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("invalid value for '" + where + "." + key + "': " + e.what());
        }
    }
}

template <class T>
Handler set(T& target) {
    return [&target](const json& v) {
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw BadValue("expected a number");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw BadValue("expected an integer");
            if (std::is_unsigned_v<T> && !v.is_number_unsigned()) throw BadValue("expected a non-negative integer");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw BadValue("expected a string");
        }
        target = v.get<T>();
    };
}

template <class T, class Parse>
Handler set_enum(T& target, Parse parse) {
    return [&target, parse](const json& v) {
        if (!v.is_string()) throw BadValue("expected a string");
        target = parse(v.get<std::string>());
    };
}

}  // namespace

RankRange parse_rank_range(const std::string& text) {
    RankRange r;
    try {
        const auto dots = text.find("..");
        std::size_t used = 0;
        if (dots == std::string::npos) {
            r.first = r.last = std::stoi(text, &used);
            if (used != text.size()) throw ConfigError("");
        } else {
            const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
            r.first = std::stoi(a, &used);
            if (used != a.size()) throw ConfigError("");
            r.last = std::stoi(b, &used);
            if (used != b.size()) throw ConfigError("");
        }
    } catch (const std::exception&) {
        throw ConfigError("malformed rank range '" + text + "' (expected a..b or a single rank)");
    }
    return r;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["scenario"] = to_string(c.scenario);
    j["sample_rate"] = c.sample_rate;
    j["input_path"] = c.input_path;
    j["soi"] = {{"amplitude", c.soi.amplitude}, {"carrier_freq", c.soi.carrier_freq}, {"damping", c.soi.damping},
                {"phase", c.soi.phase},         {"fault_freq", c.soi.fault_freq},     {"duration", c.soi.duration}};
    nlohmann::ordered_json noise = {{"gaussian_sigma", c.noise.gaussian_sigma},
                                    {"impulse_max_amplitude", c.noise.impulse_max_amplitude},
                                    {"impulse_carrier_freq", c.noise.impulse_carrier_freq},
                                    {"impulse_rate", c.noise.impulse_rate},
                                    {"impulse_damping", c.noise.impulse_damping}};
    if (c.noise.machine_response)
        noise["machine_response"] = {{"center_freq", c.noise.machine_response->center_freq},
                                     {"quality", c.noise.machine_response->quality}};
    else
        noise["machine_response"] = nullptr;
    j["noise"] = noise;
    j["stft"] = {{"window_length", c.stft.window_length},
                 {"overlap", c.stft.overlap},
                 {"nfft", c.stft.nfft},
                 {"window", "hamming"}};
    j["method"] = to_string(c.method);
    j["ranks"] = {{"first", c.ranks.first}, {"last", c.ranks.last}};
    j["trials"] = c.trials;
    j["criterion"] = to_string(c.criterion);
    j["fault_freq"] = c.fault_freq;
    j["base_seed"] = c.base_seed;
    j["tsvd_rank"] = c.tsvd_rank;
    j["max_iters"] = c.max_iters;
    j["min_bandwidth"] = c.min_bandwidth;
    j["beta_floor"] = c.beta_floor;
    j["onmfs_iters"] = c.onmfs_iters;
    j["nmf_iters"] = c.nmf_iters;
    j["envsi"] = {{"harmonics", c.envsi.harmonics}, {"tol_bins", c.envsi.tol_bins}};
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& doc, const ExperimentConfig& base) {
    ExperimentConfig c = base;
    read_object(doc, "experiment",
                {
                    {"scenario", set_enum(c.scenario, scenario_from_string)},
                    {"sample_rate", set(c.sample_rate)},
                    {"input_path", set(c.input_path)},
                    {"soi",
                     [&](const json& v) {
                         read_object(v, "soi", {{"amplitude", set(c.soi.amplitude)},
                                                {"carrier_freq", set(c.soi.carrier_freq)},
                                                {"damping", set(c.soi.damping)},
                                                {"phase", set(c.soi.phase)},
                                                {"fault_freq", set(c.soi.fault_freq)},
                                                {"duration", set(c.soi.duration)}});
                     }},
                    {"noise",
                     [&](const json& v) {
                         read_object(v, "noise",
                                     {{"gaussian_sigma", set(c.noise.gaussian_sigma)},
                                      {"impulse_max_amplitude", set(c.noise.impulse_max_amplitude)},
                                      {"impulse_carrier_freq", set(c.noise.impulse_carrier_freq)},
                                      {"impulse_rate", set(c.noise.impulse_rate)},
                                      {"impulse_damping", set(c.noise.impulse_damping)},
                                      {"machine_response", [&](const json& m) {
                                           if (m.is_null()) {
                                               c.noise.machine_response.reset();
                                               return;
                                           }
                                           MachineResponse r{0.0, 1.0};
                                           read_object(m, "noise.machine_response",
                                                       {{"center_freq", set(r.center_freq)},
                                                        {"quality", set(r.quality)}});
                                           c.noise.machine_response = r;
                                       }}});
                     }},
                    {"stft",
                     [&](const json& v) {
                         read_object(v, "stft", {{"window_length", set(c.stft.window_length)},
                                                 {"overlap", set(c.stft.overlap)},
                                                 {"nfft", set(c.stft.nfft)},
                                                 {"window", [](const json& w) {
                                                      if (w != "hamming")
                                                          throw ConfigError("only the hamming window is supported");
                                                  }}});
                     }},
                    {"method", set_enum(c.method, method_from_string)},
                    {"ranks",
                     [&](const json& v) {
                         if (v.is_string()) {
                             c.ranks = parse_rank_range(v.get<std::string>());
                             return;
                         }
                         read_object(v, "ranks", {{"first", set(c.ranks.first)}, {"last", set(c.ranks.last)}});
                     }},
                    {"trials", set(c.trials)},
                    {"criterion", set_enum(c.criterion, criterion_from_string)},
                    {"fault_freq", set(c.fault_freq)},
                    {"base_seed", set(c.base_seed)},
                    {"tsvd_rank", set(c.tsvd_rank)},
                    {"max_iters", set(c.max_iters)},
                    {"min_bandwidth", set(c.min_bandwidth)},
                    {"beta_floor", set(c.beta_floor)},
                    {"onmfs_iters", set(c.onmfs_iters)},
                    {"nmf_iters", set(c.nmf_iters)},
                    {"envsi",
                     [&](const json& v) {
                         read_object(v, "envsi",
                                     {{"harmonics", set(c.envsi.harmonics)}, {"tol_bins", set(c.envsi.tol_bins)}});
                     }},
                });
    return c;
}

std::vector<std::string> preset_names() {
    return {"gauss_0.5",        "gauss_1.7",        "gauss_2.0",        "nongauss_5_0.5",
            "nongauss_5_1.1",   "nongauss_5_2.0",   "nongauss_15_0.5",  "nongauss_15_1.1",
            "nongauss_15_2.0",  "rig_vibration",    "conveyor_acoustic"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    if (name.rfind("gauss_", 0) == 0) {
        const std::string sigma = name.substr(6);
        if (sigma != "0.5" && sigma != "1.7" && sigma != "2.0") throw ConfigError("unknown preset '" + name + "'");
        c.scenario = Scenario::sim_gaussian;
        c.noise.gaussian_sigma = std::stod(sigma);
        c.noise.impulse_max_amplitude = 0.0;
        c.criterion = Criterion::kurtosis;
        return c;
    }
    if (name.rfind("nongauss_", 0) == 0) {
        const std::string rest = name.substr(9);
        const auto us = rest.find('_');
        const std::string amp = rest.substr(0, us);
        const std::string sigma = us == std::string::npos ? "" : rest.substr(us + 1);
        if ((amp != "5" && amp != "15") || (sigma != "0.5" && sigma != "1.1" && sigma != "2.0"))
            throw ConfigError("unknown preset '" + name + "'");
        c.scenario = Scenario::sim_nongaussian;
        c.noise.gaussian_sigma = std::stod(sigma);
        c.noise.impulse_max_amplitude = std::stod(amp);
        c.noise.impulse_carrier_freq = 6000.0;
        c.criterion = Criterion::envsi;
        return c;
    }
    if (name == "rig_vibration") {
        c.scenario = Scenario::file;
        c.fault_freq = 91.5;
        c.criterion = Criterion::kurtosis;
        return c;
    }
    if (name == "conveyor_acoustic") {
        c.scenario = Scenario::file;
        c.fault_freq = 5.4;
        c.criterion = Criterion::envsi;
        return c;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

CliConfig cli_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config document must be an object");
    CliConfig cli;
    if (doc.contains("preset")) {
        if (!doc["preset"].is_string()) throw ConfigError("'preset' must be a string");
        cli.experiment = preset(doc["preset"].get<std::string>());
    }
    std::string out_dir = cli.out_dir.string();
    read_object(doc, "config",
                {{"preset", [](const json&) {}},
                 {"experiment", [&](const json& v) { cli.experiment = config_from_json(v, cli.experiment); }},
                 {"out_dir", set(out_dir)},
                 {"verbosity", set(cli.verbosity)},
                 {"rank", set(cli.rank)},
                 {"jobs", set(cli.jobs)},
                 {"methods", [&](const json& v) {
                      if (!v.is_array()) throw ConfigError("'methods' must be an array");
                      cli.methods.clear();
                      for (const auto& m : v) {
                          if (!m.is_string()) throw ConfigError("'methods' entries must be strings");
                          cli.methods.push_back(method_from_string(m.get<std::string>()));
                      }
                  }}});
    cli.out_dir = out_dir;
    if (cli.jobs < 1) throw ConfigError("jobs must be at least 1");
    return cli;
}

nlohmann::ordered_json cli_config_to_json(const CliConfig& config) {
    nlohmann::ordered_json j;
    j["experiment"] = config_to_json(config.experiment);
    j["out_dir"] = config.out_dir.string();
    j["verbosity"] = config.verbosity;
    j["rank"] = config.rank;
    auto methods = nlohmann::ordered_json::array();
    for (auto m : config.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
    j["jobs"] = config.jobs;
    return j;
}

CliConfig load_cli_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return cli_config_from_json(doc);
}

nlohmann::ordered_json config_schema() {
    using oj = nlohmann::ordered_json;
    auto num = [](const char* desc) { return oj{{"type", "number"}, {"description", desc}}; };
    auto integer = [](const char* desc) { return oj{{"type", "integer"}, {"description", desc}}; };
    auto obj = [](oj props) { return oj{{"type", "object"}, {"additionalProperties", false}, {"properties", props}}; };

    oj experiment = obj({
        {"scenario", {{"enum", oj::array({"sim_gaussian", "sim_nongaussian", "file"})}}},
        {"sample_rate", num("simulation sample rate, Hz")},
        {"input_path", {{"type", "string"}, {"description", "WAV or CSV recording (scenario=file)"}}},
        {"soi", obj({{"amplitude", num("impulse amplitude")},
                     {"carrier_freq", num("carrier, Hz")},
                     {"damping", num("decay rate, 1/s")},
                     {"phase", num("rad")},
                     {"fault_freq", num("repetition rate, Hz")},
                     {"duration", num("s")}})},
        {"noise", obj({{"gaussian_sigma", num("standard deviation of the Gaussian background")},
                       {"impulse_max_amplitude", num("outlier amplitudes are uniform in (0, max]")},
                       {"impulse_carrier_freq", num("Hz")},
                       {"impulse_rate", num("Poisson arrival rate, 1/s")},
                       {"impulse_damping", num("1/s")},
                       {"machine_response", {{"type", oj::array({"object", "null"})},
                                             {"properties", {{"center_freq", num("Hz")}, {"quality", num("Q")}}}}}})},
        {"stft", obj({{"window_length", integer("samples")},
                      {"overlap", integer("samples")},
                      {"nfft", integer("DFT points")},
                      {"window", {{"enum", oj::array({"hamming"})}}}})},
        {"method", {{"enum", oj::array({"ss_onmf", "onmfs", "nmf_mu", "sk"})}}},
        {"ranks", {{"oneOf", oj::array({obj({{"first", integer("")}, {"last", integer("")}}),
                              {{"type", "string"}, {"pattern", "^[0-9]+(\\.\\.[0-9]+)?$"}}})}}},
        {"trials", integer("Monte-Carlo trials per rank")},
        {"criterion", {{"enum", oj::array({"kurtosis", "envsi"})}}},
        {"fault_freq", num("fault frequency used for ENVSI, Hz")},
        {"base_seed", integer("root of every derived seed")},
        {"tsvd_rank", integer("0 means J = R")},
        {"max_iters", integer("SS-ONMF iterations")},
        {"min_bandwidth", num("minimum support fraction per filter")},
        {"beta_floor", num("floor of the perturbation scale")},
        {"onmfs_iters", integer("ONMFS candidates")},
        {"nmf_iters", integer("NMF-MU iterations")},
        {"envsi", obj({{"harmonics", integer("")}, {"tol_bins", integer("")}})},
    });
    return obj({{"preset", {{"type", "string"}, {"description", "applied before 'experiment' overrides"}}},
                {"experiment", experiment},
                {"out_dir", {{"type", "string"}}},
                {"verbosity", integer("0 silent, 1 progress, 2 detail")},
                {"rank", integer("rank used by analyze")},
                {"methods", {{"type", "array"}, {"items", {{"enum", oj::array({"ss_onmf", "onmfs", "nmf_mu", "sk"})}}}}},
                {"jobs", integer("worker threads")}});
}

}  // namespace ssonmf
