#include "ssonmf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "ssonmf/error.hpp"
#include "ssonmf/fft.hpp"

namespace ssonmf {

double kurtosis(std::span<const double> x) {
    if (x.size() < 4) throw Error("kurtosis needs at least 4 samples");
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    double peak = 0.0;
    for (double v : x) {
        mean += v;
        peak = std::max(peak, std::abs(v));
    }
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    // Rounding of the mean leaves a residual variance of order (eps * peak)^2
    // for constant input.
    const double resolution = 1e-12 * peak;
    if (peak == 0.0 || m2 <= resolution * resolution) throw Error("degenerate signal");
    return m4 / (m2 * m2);
}

double kurtosis(const Signal& signal) { return kurtosis(signal.view()); }

EnvelopeSpectrum envelope_spectrum(const Signal& signal, double f_max) {
    const double nyquist = 0.5 * signal.sample_rate();
    if (!(f_max > 0.0) || f_max > nyquist * (1.0 + 1e-12)) throw Error("envelope band limit must lie in (0, Nyquist]");
    const std::size_t n = signal.size();

    RealFft fft(n);
    std::vector<std::complex<double>> half(fft.bins());
    fft.forward(signal.view(), half);

    // Analytic signal: keep DC (and Nyquist for even n), double positive bins.
    std::vector<std::complex<double>> full(n, {0.0, 0.0});
    full[0] = half[0];
    const std::size_t positive_end = (n % 2 == 0) ? n / 2 : (n + 1) / 2;
    for (std::size_t k = 1; k < positive_end; ++k) full[k] = 2.0 * half[k];
    if (n % 2 == 0 && n > 1) full[n / 2] = half[n / 2];
    const auto analytic = complex_dft(full, true);

    std::vector<double> env(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        env[i] = std::abs(analytic[i]) / static_cast<double>(n);
        mean += env[i];
    }
    mean /= static_cast<double>(n);
    for (double& e : env) e -= mean;

    fft.forward(env, half);
    const double df = signal.sample_rate() / static_cast<double>(n);
    const auto last = std::min(static_cast<std::size_t>(std::floor(f_max / df + 1e-9)), half.size() - 1);

    EnvelopeSpectrum out;
    out.source_length = n;
    out.freq_axis.resize(last + 1);
    out.amplitudes.resize(last + 1);
    for (std::size_t k = 0; k <= last; ++k) {
        const bool single = k == 0 || (n % 2 == 0 && k == n / 2);
        out.freq_axis[k] = static_cast<double>(k) * df;
        out.amplitudes[k] = std::abs(half[k]) / static_cast<double>(n) * (single ? 1.0 : 2.0);
    }
    return out;
}

double envelope_band_limit(double fault_freq, const EnvsiParams& params) {
    return (params.harmonics + 1.0) * fault_freq;
}

double envsi(const EnvelopeSpectrum& env, double fault_freq, int harmonics, int tol_bins) {
    if (harmonics < 1) throw Error("ENVSI needs at least one harmonic");
    if (tol_bins < 0) throw Error("ENVSI tolerance must be non-negative");
    if (!(fault_freq > 0.0)) throw Error("fault frequency must be positive");
    if (env.freq_axis.size() < 2 || env.freq_axis.size() != env.amplitudes.size())
        throw Error("malformed envelope spectrum");
    const double df = env.resolution();
    const double cap = (harmonics + 0.5) * fault_freq;
    if (cap > env.freq_axis.back() * (1.0 + 1e-12)) throw Error("envelope spectrum does not cover the harmonic band");
    const double spacing = fault_freq / df;
    if (!(2.0 * tol_bins < spacing)) throw Error("ENVSI tolerance windows overlap; reduce tol_bins");

    const auto last = static_cast<std::size_t>(std::floor(cap / df + 1e-9));
    double total = 0.0;
    for (std::size_t k = 1; k <= last && k < env.amplitudes.size(); ++k) total += env.amplitudes[k] * env.amplitudes[k];
    if (!(total > 0.0)) throw Error("no envelope energy");

    double comb = 0.0;
    for (int h = 1; h <= harmonics; ++h) {
        const auto center = static_cast<long long>(std::llround(h * fault_freq / df));
        double peak = 0.0;
        for (long long k = center - tol_bins; k <= center + tol_bins; ++k) {
            if (k < 1 || static_cast<std::size_t>(k) > last) continue;
            peak = std::max(peak, env.amplitudes[static_cast<std::size_t>(k)]);
        }
        comb += peak * peak;
    }
    return std::clamp(comb / total, 0.0, 1.0);
}

std::vector<double> spectral_kurtosis(const Spectrogram& spec) {
    const auto frames = spec.frames.cols();
    if (frames < 8) throw Error("spectral kurtosis needs at least 8 frames");
    std::vector<double> sk(static_cast<std::size_t>(spec.frames.rows()), 0.0);
    for (Eigen::Index f = 0; f < spec.frames.rows(); ++f) {
        double m2 = 0.0, m4 = 0.0;
        for (Eigen::Index t = 0; t < frames; ++t) {
            const double p = std::norm(spec.frames(f, t));
            m2 += p;
            m4 += p * p;
        }
        m2 /= static_cast<double>(frames);
        m4 /= static_cast<double>(frames);
        sk[static_cast<std::size_t>(f)] = m2 > 0.0 ? m4 / (m2 * m2) - 2.0 : 0.0;
    }
    return sk;
}

BandFilter spectral_kurtosis_selector(const Spectrogram& spec) {
    BandFilter filter;
    filter.freq_axis = spec.freq_axis;
    filter.response = spectral_kurtosis(spec);
    for (double& r : filter.response) r = std::max(r, 0.0);
    if (*std::max_element(filter.response.begin(), filter.response.end()) <= 0.0)
        throw Error("spectral kurtosis is non-positive in every bin");
    return filter.normalized(FilterNormalization::unit_max);
}

double band_centroid(const BandFilter& filter) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < filter.response.size(); ++k) {
        const double e = filter.response[k] * filter.response[k];
        num += filter.freq_axis[k] * e;
        den += e;
    }
    if (!(den > 0.0)) throw Error("band filter response is identically zero");
    return num / den;
}

double band_energy_fraction(const BandFilter& filter, double lo, double hi) {
    double in = 0.0, total = 0.0;
    for (std::size_t k = 0; k < filter.response.size(); ++k) {
        const double e = filter.response[k] * filter.response[k];
        total += e;
        if (filter.freq_axis[k] >= lo && filter.freq_axis[k] <= hi) in += e;
    }
    if (!(total > 0.0)) throw Error("band filter response is identically zero");
    return in / total;
}

std::vector<BandFilter> filters_from_model(const FactorModel& model, const std::vector<double>& freq_axis) {
    if (static_cast<std::size_t>(model.W.rows()) != freq_axis.size())
        throw Error("model bin count does not match the frequency axis");
    std::vector<BandFilter> out;
    out.reserve(static_cast<std::size_t>(model.W.cols()));
    for (Eigen::Index r = 0; r < model.W.cols(); ++r) {
        BandFilter f;
        f.freq_axis = freq_axis;
        f.response.assign(model.W.col(r).data(), model.W.col(r).data() + model.W.rows());
        for (double& v : f.response) v = std::max(v, 0.0);
        f.normalization = FilterNormalization::unit_l2;
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

bool is_zero(const BandFilter& f) {
    return std::none_of(f.response.begin(), f.response.end(), [](double v) { return v > 0.0; });
}

double try_envsi(const Signal& s, const SelectionInput& in, EnvelopeSpectrum* keep = nullptr,
                 std::string* why = nullptr) {
    auto env = envelope_spectrum(s, std::min(envelope_band_limit(in.fault_freq, in.envsi), 0.5 * s.sample_rate()));
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
        v = envsi(env, in.fault_freq, in.envsi.harmonics, in.envsi.tol_bins);
    } catch (const Error& e) {
        if (why) *why = e.what();
    }
    if (keep) *keep = std::move(env);
    return v;
}

double try_kurtosis(const Signal& s, std::string* why = nullptr) {
    try {
        return kurtosis(s);
    } catch (const Error& e) {
        if (why) *why = e.what();
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

DiagnosticReport select_best_filter(const Signal& signal, const FilterBank& bank,
                                    const std::vector<BandFilter>& candidates, const SelectionInput& input) {
    if (candidates.empty()) throw Error("no candidate filters");
    DiagnosticReport report;
    report.criterion = input.criterion;
    report.column_scores.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());

    int best = -1;
    std::string why;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (is_zero(candidates[c])) continue;
        const Signal filtered = bank.apply(candidates[c]);
        const double score = input.criterion == Criterion::kurtosis ? try_kurtosis(filtered, &why) : try_envsi(filtered, input, nullptr, &why);
        report.column_scores[c] = score;
        if (std::isfinite(score) && score > best_score) {
            best_score = score;
            best = static_cast<int>(c);
        }
    }
    if (best < 0) throw Error("all filters produced degenerate signals" + (why.empty() ? "" : ": " + why));

    report.selected_filter_index = best;
    report.filter = candidates[static_cast<std::size_t>(best)].normalized(FilterNormalization::unit_max);
    Signal filtered = bank.apply(report.filter);
    report.kurtosis = try_kurtosis(filtered);
    report.envsi = try_envsi(filtered, input, &report.envelope);
    if (input.criterion == Criterion::kurtosis) report.kurtosis = best_score;
    else report.envsi = best_score;
    if (!std::isfinite(report.envsi)) report.envsi = 0.0;
    if (!std::isfinite(report.kurtosis)) report.kurtosis = 0.0;
    report.raw_kurtosis = try_kurtosis(signal);
    report.raw_envsi = try_envsi(signal, input);
    if (!std::isfinite(report.raw_envsi)) report.raw_envsi = 0.0;
    if (input.keep_filtered) report.filtered = std::move(filtered);
    return report;
}

DiagnosticReport select_best_filter(const Signal& signal, const FactorModel& model, const StftConfig& stft,
                                    const SelectionInput& input) {
    if (model.W.rows() != stft.bins()) throw Error("model bin count does not match the STFT configuration");
    const FilterBank bank(signal, stft);
    return select_best_filter(signal, bank, filters_from_model(model, frequency_axis(stft, signal.sample_rate())),
                              input);
}

std::string to_string(Criterion c) { return c == Criterion::kurtosis ? "kurtosis" : "envsi"; }

Criterion criterion_from_string(const std::string& s) {
    if (s == "kurtosis") return Criterion::kurtosis;
    if (s == "envsi") return Criterion::envsi;
    throw ConfigError("unknown criterion '" + s + "' (expected kurtosis or envsi)");
}

nlohmann::ordered_json report_to_json(const DiagnosticReport& report) {
    nlohmann::ordered_json j;
    j["criterion"] = to_string(report.criterion);
    j["criterion_value"] = report.criterion_value();
    j["kurtosis"] = report.kurtosis;
    j["envsi"] = report.envsi;
    j["raw_kurtosis"] = report.raw_kurtosis;
    j["raw_envsi"] = report.raw_envsi;
    j["selected_filter_index"] = report.selected_filter_index;
    j["filter_centroid_hz"] = band_centroid(report.filter);
    auto scores = nlohmann::json::array();
    for (double s : report.column_scores) scores.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json());
    j["column_scores"] = scores;
    j["envelope"] = {{"bins", report.envelope.freq_axis.size()},
                     {"resolution_hz", report.envelope.resolution()},
                     {"source_length", report.envelope.source_length}};
    return j;
}

namespace {

void write_two_columns(const std::vector<double>& a, const std::vector<double>& b, const char* header,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << header << '\n';
    char buf[64];
    for (std::size_t k = 0; k < a.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", a[k], b[k]);
        out << buf << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

void export_envelope_csv(const EnvelopeSpectrum& env, const std::filesystem::path& path) {
    write_two_columns(env.freq_axis, env.amplitudes, "freq_hz,amplitude", path);
}

void export_filter_csv(const BandFilter& filter, const std::filesystem::path& path) {
    write_two_columns(filter.freq_axis, filter.response, "freq_hz,response", path);
}

}  // namespace ssonmf
