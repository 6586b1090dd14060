#include "ssonmf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "ssonmf/config.hpp"
#include "ssonmf/error.hpp"
#include "ssonmf/random.hpp"

namespace ssonmf {

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::sim_gaussian: return "sim_gaussian";
        case Scenario::sim_nongaussian: return "sim_nongaussian";
        case Scenario::file: return "file";
    }
    return "unknown";
}

std::string to_string(Method m) {
    switch (m) {
        case Method::ss_onmf: return "ss_onmf";
        case Method::onmfs: return "onmfs";
        case Method::nmf_mu: return "nmf_mu";
        case Method::sk: return "sk";
    }
    return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
    if (s == "sim_gaussian") return Scenario::sim_gaussian;
    if (s == "sim_nongaussian") return Scenario::sim_nongaussian;
    if (s == "file") return Scenario::file;
    throw ConfigError("unknown scenario '" + s + "'");
}

Method method_from_string(const std::string& s) {
    if (s == "ss_onmf") return Method::ss_onmf;
    if (s == "onmfs") return Method::onmfs;
    if (s == "nmf_mu") return Method::nmf_mu;
    if (s == "sk") return Method::sk;
    throw ConfigError("unknown method '" + s + "' (expected ss_onmf, onmfs, nmf_mu or sk)");
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw ConfigError("trials must be at least 1");
    if (ranks.first < 2 || ranks.last > 64 || ranks.first > ranks.last)
        throw ConfigError("rank range must lie within [2, 64] with first <= last");
    if (method == Method::onmfs && ranks.last > kMaxOnmfsRank)
        throw ConfigError("ONMFS enumerates 2^R sign patterns; rank must not exceed 16");
    if (!(fault_freq > 0.0)) throw ConfigError("fault frequency must be positive");
    if (tsvd_rank < 0) throw ConfigError("tsvd_rank must be non-negative");
    if (tsvd_rank > 0 && tsvd_rank < ranks.last && method != Method::nmf_mu && method != Method::sk)
        throw ConfigError("tsvd_rank must be at least the largest rank");
    if (max_iters < 1 || onmfs_iters < 1 || nmf_iters < 1) throw ConfigError("iteration counts must be positive");
    if (!(min_bandwidth > 0.0 && min_bandwidth < 1.0)) throw ConfigError("min_bandwidth must lie in (0, 1)");
    if (!(beta_floor > 0.0 && beta_floor < 1.0)) throw ConfigError("beta_floor must lie in (0, 1)");
    if (envsi.harmonics < 1 || envsi.tol_bins < 0) throw ConfigError("invalid ENVSI parameters");
    try {
        stft.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (scenario == Scenario::file) {
        if (input_path.empty()) throw ConfigError("scenario 'file' requires input_path");
        if (!std::filesystem::exists(input_path)) throw ConfigError("input_path does not exist: " + input_path);
    } else {
        if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
        if (scenario == Scenario::sim_nongaussian && !(noise.impulse_max_amplitude > 0.0))
            throw ConfigError("sim_nongaussian requires impulse_max_amplitude > 0");
    }
}

std::uint64_t trial_seed(std::uint64_t base_seed, int rank, int trial) {
    const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(rank)) << 32) |
                              static_cast<std::uint32_t>(trial);
    return base_seed ^ mix64(key ^ 0x7472'6961'6c00'0000ULL);
}

std::uint64_t noise_seed(std::uint64_t base_seed) { return derive_seed(base_seed, 0x6e6f697365ULL); }

SimulatedSignal simulate(const ExperimentConfig& config) {
    if (config.scenario == Scenario::file) throw ConfigError("simulate needs a simulated scenario");
    SoiSpec soi = config.soi;
    NoiseSpec noise = config.noise;
    noise.seed = noise_seed(config.base_seed);
    if (config.scenario == Scenario::sim_gaussian) noise.impulse_max_amplitude = 0.0;
    Signal s = generate_soi(soi, config.sample_rate);
    auto parts = generate_noise_components(noise, soi.duration, config.sample_rate);
    Signal mixed = mix({s, parts.gaussian, parts.impulsive}).with_label("signal");
    return {std::move(mixed), std::move(s), std::move(parts.gaussian), std::move(parts.impulsive)};
}

Signal build_signal(const ExperimentConfig& config) {
    if (config.scenario == Scenario::file) return load_signal(config.input_path);
    return simulate(config).mixed;
}

// ---------------------------------------------------------------------------

namespace {

Signal prepare_signal(const ExperimentConfig& config, std::optional<Signal>& signal) {
    if (signal) {
        ExperimentConfig check = config;
        check.scenario = Scenario::sim_gaussian;  // the provided signal stands in for any input file
        check.validate();
        return std::move(*signal);
    }
    config.validate();
    return build_signal(config);
}

}  // namespace

Experiment::Experiment(ExperimentConfig config, std::optional<Signal> signal)
    : config_(std::move(config)),
      signal_(prepare_signal(config_, signal)),
      spectrogram_(stft(signal_, config_.stft)),
      bank_(std::make_unique<FilterBank>(signal_, config_.stft)) {
    if (config_.method == Method::ss_onmf || config_.method == Method::onmfs) {
        const int cap = static_cast<int>(std::min(spectrogram_.power.rows(), spectrogram_.power.cols()));
        int j = config_.tsvd_rank > 0 ? config_.tsvd_rank : config_.ranks.last;
        if (j > cap) throw ConfigError("TSVD rank exceeds spectrogram dimensions");
        svd_ = truncated_svd(spectrogram_.power, j);
    }
    raw_kurtosis_ = kurtosis(signal_);
    SelectionInput in{config_.criterion, config_.fault_freq, config_.envsi, false};
    try {
        const double limit = std::min(envelope_band_limit(in.fault_freq, in.envsi), 0.5 * signal_.sample_rate());
        raw_envsi_ = envsi(envelope_spectrum(signal_, limit), in.fault_freq, in.envsi.harmonics, in.envsi.tol_bins);
    } catch (const Error&) {
        raw_envsi_ = 0.0;
    }
}

TrialOutcome Experiment::run_trial(int rank, std::uint64_t seed, bool keep_filtered) const {
    const auto& c = config_;
    FactorModel model;
    std::vector<BandFilter> candidates;
    switch (c.method) {
        case Method::ss_onmf: {
            SsOnmfConfig sc;
            sc.rank = rank;
            sc.tsvd_rank = c.tsvd_rank > 0 ? c.tsvd_rank : rank;
            sc.max_iters = c.max_iters;
            sc.min_bandwidth = c.min_bandwidth;
            sc.beta_floor = c.beta_floor;
            sc.seed = seed;
            model = ss_onmf(spectrogram_.power, *svd_, sc);
            break;
        }
        case Method::onmfs: {
            const int j = c.tsvd_rank > 0 ? c.tsvd_rank : rank;
            model = onmfs(spectrogram_.power, *svd_, j, rank, c.onmfs_iters, seed);
            break;
        }
        case Method::nmf_mu:
            model = nmf_mu(spectrogram_.power, rank, c.nmf_iters, seed);
            break;
        case Method::sk:
            model.method = "sk";
            model.seed = seed;
            candidates.push_back(spectral_kurtosis_selector(spectrogram_));
            model.W = Eigen::Map<const Eigen::VectorXd>(candidates[0].response.data(),
                                                        static_cast<Eigen::Index>(candidates[0].response.size()));
            model.rank = 1;
            break;
    }
    if (candidates.empty()) candidates = filters_from_model(model, spectrogram_.freq_axis);

    SelectionInput in{c.criterion, c.fault_freq, c.envsi, keep_filtered};
    DiagnosticReport report = select_best_filter(signal_, *bank_, candidates, in);
    return {std::move(report), std::move(model)};
}

TrialOutcome run_trial(const ExperimentConfig& config, int rank, std::uint64_t seed) {
    ExperimentConfig single = config;
    single.ranks = {std::max(rank, 2), std::max(rank, 2)};
    return Experiment(single).run_trial(rank, seed);
}

// ---------------------------------------------------------------------------

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error("quantile of empty sample");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
    BoxStats b;
    if (values.empty()) return b;
    std::sort(values.begin(), values.end());
    b.count = static_cast<int>(values.size());
    b.min = values.front();
    b.max = values.back();
    b.median = quantile_sorted(values, 0.5);
    b.q1 = quantile_sorted(values, 0.25);
    b.q3 = quantile_sorted(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q1;
    b.whisker_high = b.q3;
    bool have_low = false;
    for (double v : values) {
        if (v < lo_fence || v > hi_fence) {
            b.outliers.push_back(v);
            continue;
        }
        if (!have_low) {
            b.whisker_low = v;
            have_low = true;
        }
        b.whisker_high = v;
    }
    return b;
}

const RankSummary& McResult::summary(int rank) const {
    for (const auto& r : ranks)
        if (r.rank == rank) return r;
    throw Error("rank " + std::to_string(rank) + " not in result");
}

const TrialRecord& McResult::trial(int rank, int trial_index) const {
    for (const auto& t : trials)
        if (t.rank == rank && t.trial == trial_index) return t;
    throw Error("trial not in result");
}

void summarize(McResult& result) {
    result.ranks.clear();
    std::vector<int> rank_ids;
    for (const auto& t : result.trials)
        if (std::find(rank_ids.begin(), rank_ids.end(), t.rank) == rank_ids.end()) rank_ids.push_back(t.rank);
    std::sort(rank_ids.begin(), rank_ids.end());

    result.best_rank = 0;
    double best_median = -std::numeric_limits<double>::infinity();
    for (int rank : rank_ids) {
        RankSummary s;
        s.rank = rank;
        std::vector<double> values;
        for (const auto& t : result.trials) {
            if (t.rank != rank) continue;
            if (t.ok) {
                ++s.succeeded;
                values.push_back(t.value);
            } else {
                ++s.failed;
            }
        }
        s.stats = box_stats(values);
        if (s.succeeded > 0) {
            double closest = std::numeric_limits<double>::infinity();
            for (const auto& t : result.trials) {
                if (t.rank != rank || !t.ok) continue;
                const double d = std::abs(t.value - s.stats.median);
                if (d < closest) {
                    closest = d;
                    s.median_trial = t.trial;
                }
            }
            if (s.stats.median > best_median) {
                best_median = s.stats.median;
                result.best_rank = rank;
            }
        }
        result.ranks.push_back(std::move(s));
    }
}

McResult rank_sweep(const ExperimentConfig& config, int jobs) { return rank_sweep(Experiment(config), jobs); }

McResult rank_sweep(const Experiment& experiment, int jobs) {
    const auto& config = experiment.config();
    McResult result;
    result.config = config;
    result.raw_kurtosis = experiment.raw_kurtosis();
    result.raw_envsi = experiment.raw_envsi();

    for (int rank = config.ranks.first; rank <= config.ranks.last; ++rank)
        for (int trial = 0; trial < config.trials; ++trial) {
            TrialRecord rec;
            rec.rank = rank;
            rec.trial = trial;
            rec.seed = trial_seed(config.base_seed, rank, trial);
            result.trials.push_back(std::move(rec));
        }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t idx = next++; idx < result.trials.size(); idx = next++) {
            TrialRecord& rec = result.trials[idx];
            try {
                TrialOutcome out = experiment.run_trial(rec.rank, rec.seed);
                rec.ok = true;
                rec.value = out.report.criterion_value();
                rec.kurtosis = out.report.kurtosis;
                rec.envsi = out.report.envsi;
                rec.selected_filter = out.report.selected_filter_index;
                rec.centroid = band_centroid(out.report.filter);
                rec.accepted_steps = out.model.accepted_steps;
                rec.filter = std::move(out.report.filter);
                rec.envelope = std::move(out.report.envelope);
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.failure = e.what();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(result.trials.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    summarize(result);
    if (result.best_rank == 0) throw Error("all trials failed at every rank");
    return result;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::string csv_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

void export_report(const McResult& result, const std::filesystem::path& out_dir) {
    if (result.trials.empty()) throw Error("nothing to export");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "filters", ec);
    std::filesystem::create_directories(out_dir / "envelopes", ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw Error("cannot create output directory " + out_dir.string());

    const std::string method = to_string(result.config.method);
    {
        auto out = open_out(out_dir / "trials.csv");
        out << "method,rank,trial,seed,status,criterion_value,kurtosis,envsi,selected_filter,centroid_hz,"
               "accepted_steps,failure\n";
        for (const auto& t : result.trials) {
            out << method << ',' << t.rank << ',' << t.trial << ',' << t.seed << ',' << (t.ok ? "ok" : "failed") << ',';
            if (t.ok)
                out << num(t.value) << ',' << num(t.kurtosis) << ',' << num(t.envsi) << ',' << t.selected_filter << ','
                    << num(t.centroid) << ',' << t.accepted_steps << ",";
            else
                out << ",,,,,,";
            out << (t.ok ? "" : csv_escape(t.failure)) << '\n';
        }
    }
    {
        auto out = open_out(out_dir / "summary.csv");
        out << "method,rank,succeeded,failed,median,q1,q3,min,max,whisker_low,whisker_high,outlier_count,outliers,"
               "median_trial\n";
        for (const auto& r : result.ranks) {
            const auto& b = r.stats;
            out << method << ',' << r.rank << ',' << r.succeeded << ',' << r.failed << ',';
            if (r.succeeded > 0) {
                out << num(b.median) << ',' << num(b.q1) << ',' << num(b.q3) << ',' << num(b.min) << ',' << num(b.max)
                    << ',' << num(b.whisker_low) << ',' << num(b.whisker_high) << ',' << b.outliers.size() << ',';
                for (std::size_t k = 0; k < b.outliers.size(); ++k) out << (k ? ";" : "") << num(b.outliers[k]);
                out << ',' << r.median_trial << '\n';
            } else {
                out << ",,,,,,,0,,\n";
            }
        }
    }
    std::vector<std::string> files = {"trials.csv", "summary.csv"};
    for (const auto& r : result.ranks) {
        if (r.median_trial < 0) continue;
        const auto& t = result.trial(r.rank, r.median_trial);
        const std::string name = "rank_" + std::to_string(r.rank) + ".csv";
        export_filter_csv(t.filter, out_dir / "filters" / name);
        export_envelope_csv(t.envelope, out_dir / "envelopes" / name);
        files.push_back("filters/" + name);
        files.push_back("envelopes/" + name);
    }

    nlohmann::ordered_json manifest;
    manifest["method"] = method;
    manifest["config"] = config_to_json(result.config);
    manifest["best_rank"] = result.best_rank;
    manifest["raw"] = {{"kurtosis", result.raw_kurtosis}, {"envsi", result.raw_envsi}};
    auto failures = nlohmann::ordered_json::object();
    for (const auto& r : result.ranks) failures[std::to_string(r.rank)] = r.failed;
    manifest["failure_counts"] = failures;
    auto trials = nlohmann::ordered_json::array();
    for (const auto& t : result.trials) {
        nlohmann::ordered_json row = {{"rank", t.rank}, {"trial", t.trial}, {"seed", t.seed}, {"ok", t.ok}};
        if (t.ok) row["criterion_value"] = t.value;
        trials.push_back(row);
    }
    manifest["trials"] = trials;
    manifest["files"] = files;
    auto out = open_out(out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw Error("write failed: " + (out_dir / "manifest.json").string());
}

}  // namespace ssonmf
