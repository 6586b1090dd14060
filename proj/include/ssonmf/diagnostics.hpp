#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssonmf/factorize.hpp"
#include "ssonmf/signal.hpp"
#include "ssonmf/tfr.hpp"

namespace ssonmf {

struct EnvelopeSpectrum {
    std::vector<double> freq_axis;   // ascending from 0 Hz
    std::vector<double> amplitudes;  // one-sided amplitude spectrum
    std::size_t source_length = 0;

    double resolution() const noexcept { return freq_axis.size() > 1 ? freq_axis[1] - freq_axis[0] : 0.0; }
};

enum class Criterion { kurtosis, envsi };

struct EnvsiParams {
    int harmonics = 10;
    int tol_bins = 2;
};

// Non-excess kurtosis from biased central moments.
double kurtosis(const Signal& signal);
double kurtosis(std::span<const double> samples);

// Spectrum of the Hilbert envelope (mean removed), truncated at f_max.
EnvelopeSpectrum envelope_spectrum(const Signal& signal, double f_max);

// Harmonic-comb energy over total envelope energy in (0, (K + 0.5) * fault_freq].
double envsi(const EnvelopeSpectrum& env, double fault_freq, int harmonics = 10, int tol_bins = 2);

// Upper frequency of the envelope spectrum needed to score `params` harmonics.
double envelope_band_limit(double fault_freq, const EnvsiParams& params);

// Per-bin SK of the STFT coefficients, clipped at zero and scaled to unit max.
std::vector<double> spectral_kurtosis(const Spectrogram& spec);
BandFilter spectral_kurtosis_selector(const Spectrogram& spec);

// Energy centroid sum(f r^2) / sum(r^2) of a response, in Hz.
double band_centroid(const BandFilter& filter);
// Fraction of sum(r^2) located in [lo, hi] Hz.
double band_energy_fraction(const BandFilter& filter, double lo, double hi);

struct DiagnosticReport {
    double kurtosis = 0.0;
    double envsi = 0.0;
    double raw_kurtosis = 0.0;
    double raw_envsi = 0.0;
    EnvelopeSpectrum envelope;
    int selected_filter_index = 0;
    Criterion criterion = Criterion::kurtosis;
    BandFilter filter;
    std::vector<double> column_scores;  // criterion per W column, NaN when skipped
    std::optional<Signal> filtered;

    double criterion_value() const noexcept { return criterion == Criterion::kurtosis ? kurtosis : envsi; }
};

struct SelectionInput {
    Criterion criterion = Criterion::kurtosis;
    double fault_freq = 30.0;
    EnvsiParams envsi;
    bool keep_filtered = false;
};

// Filters with every W column and keeps the one maximizing the criterion
// (lowest index on ties).
DiagnosticReport select_best_filter(const Signal& signal, const FactorModel& model, const StftConfig& stft,
                                    const SelectionInput& input);
DiagnosticReport select_best_filter(const Signal& signal, const FilterBank& bank,
                                    const std::vector<BandFilter>& candidates, const SelectionInput& input);

// W columns as band filters on the given axis.
std::vector<BandFilter> filters_from_model(const FactorModel& model, const std::vector<double>& freq_axis);

std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& s);

nlohmann::ordered_json report_to_json(const DiagnosticReport& report);
void export_envelope_csv(const EnvelopeSpectrum& env, const std::filesystem::path& path);
void export_filter_csv(const BandFilter& filter, const std::filesystem::path& path);

}  // namespace ssonmf
