#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssonmf/diagnostics.hpp"
#include "ssonmf/factorize.hpp"
#include "ssonmf/signal.hpp"
#include "ssonmf/tfr.hpp"

namespace ssonmf {

enum class Scenario { sim_gaussian, sim_nongaussian, file };
enum class Method { ss_onmf, onmfs, nmf_mu, sk };

std::string to_string(Scenario s);
std::string to_string(Method m);
Scenario scenario_from_string(const std::string& s);
Method method_from_string(const std::string& s);

struct RankRange {
    int first = 6;
    int last = 15;

    int count() const noexcept { return last - first + 1; }
};

struct ExperimentConfig {
    Scenario scenario = Scenario::sim_gaussian;
    SoiSpec soi;
    NoiseSpec noise;  // noise.seed is derived from base_seed, never read directly
    double sample_rate = 25000.0;
    std::string input_path;

    StftConfig stft;
    Method method = Method::ss_onmf;
    RankRange ranks;
    int trials = 25;
    Criterion criterion = Criterion::kurtosis;
    double fault_freq = 30.0;
    std::uint64_t base_seed = 0;

    int tsvd_rank = 0;  // 0: J = R
    int max_iters = 20000;
    double min_bandwidth = 0.01;
    double beta_floor = 1e-3;
    int onmfs_iters = 300;
    int nmf_iters = 200;
    EnvsiParams envsi;

    void validate() const;
};

// Seeds never depend on which other ranks or trials are scheduled.
std::uint64_t trial_seed(std::uint64_t base_seed, int rank, int trial);
std::uint64_t noise_seed(std::uint64_t base_seed);

struct SimulatedSignal {
    Signal mixed;
    Signal soi;
    Signal gaussian;
    Signal impulsive;
};

SimulatedSignal simulate(const ExperimentConfig& config);
Signal build_signal(const ExperimentConfig& config);

struct TrialOutcome {
    DiagnosticReport report;
    FactorModel model;
};

// Signal, spectrogram, filter bank and decomposition shared by all trials of a
// configuration. Immutable after construction; run_trial is thread-safe.
class Experiment {
public:
    explicit Experiment(ExperimentConfig config, std::optional<Signal> signal = std::nullopt);

    const ExperimentConfig& config() const noexcept { return config_; }
    const Signal& signal() const noexcept { return signal_; }
    const Spectrogram& spectrogram() const noexcept { return spectrogram_; }
    double raw_kurtosis() const noexcept { return raw_kurtosis_; }
    double raw_envsi() const noexcept { return raw_envsi_; }

    // Spectrogram -> factorization -> band selection -> filtering -> scoring.
    TrialOutcome run_trial(int rank, std::uint64_t seed, bool keep_filtered = false) const;

private:
    ExperimentConfig config_;
    Signal signal_;
    Spectrogram spectrogram_;
    std::unique_ptr<FilterBank> bank_;
    std::optional<TruncatedSvd> svd_;
    double raw_kurtosis_ = 0.0;
    double raw_envsi_ = 0.0;
};

TrialOutcome run_trial(const ExperimentConfig& config, int rank, std::uint64_t seed);

struct TrialRecord {
    int rank = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string failure;
    double value = 0.0;  // criterion value
    double kurtosis = 0.0;
    double envsi = 0.0;
    int selected_filter = -1;
    double centroid = 0.0;
    int accepted_steps = 0;
    BandFilter filter;
    EnvelopeSpectrum envelope;
};

struct BoxStats {
    int count = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
    double whisker_low = 0.0;   // smallest value >= q1 - 1.5 IQR
    double whisker_high = 0.0;  // largest value <= q3 + 1.5 IQR
    std::vector<double> outliers;
};

// Linear-interpolation quantile of sorted data (p in [0, 1]).
double quantile_sorted(const std::vector<double>& sorted, double p);
BoxStats box_stats(std::vector<double> values);

struct RankSummary {
    int rank = 0;
    int succeeded = 0;
    int failed = 0;
    BoxStats stats;
    int median_trial = -1;  // trial whose value is closest to the median
};

struct McResult {
    ExperimentConfig config;
    std::vector<TrialRecord> trials;  // ordered by (rank, trial)
    std::vector<RankSummary> ranks;
    int best_rank = 0;
    double raw_kurtosis = 0.0;
    double raw_envsi = 0.0;

    const RankSummary& summary(int rank) const;
    const TrialRecord& trial(int rank, int trial) const;
};

// Re-derives per-rank statistics and best_rank from the trial table.
void summarize(McResult& result);

McResult rank_sweep(const ExperimentConfig& config, int jobs = 1);
McResult rank_sweep(const Experiment& experiment, int jobs = 1);

// Writes trials.csv, summary.csv, filters/, envelopes/ and manifest.json.
void export_report(const McResult& result, const std::filesystem::path& out_dir);

}  // namespace ssonmf
