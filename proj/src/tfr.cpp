#include "ssonmf/tfr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ssonmf/error.hpp"
#include "ssonmf/fft.hpp"

namespace ssonmf {

void StftConfig::validate() const {
    if (window_length < 1) throw Error("STFT window length must be positive");
    if (overlap < 0 || overlap >= window_length) throw Error("STFT overlap must satisfy 0 <= overlap < window");
    if (nfft < window_length) throw Error("STFT nfft must be at least the window length");
}

std::vector<double> make_window(const StftConfig& config) {
    const int m = config.window_length;
    std::vector<double> w(static_cast<std::size_t>(m), 1.0);
    if (m == 1) return w;
    for (int n = 0; n < m; ++n)
        w[static_cast<std::size_t>(n)] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (m - 1));
    return w;
}

int frame_count(std::size_t length, const StftConfig& config) {
    const auto m = static_cast<std::size_t>(config.window_length);
    if (length < m) return 0;
    return static_cast<int>((length - m) / static_cast<std::size_t>(config.hop())) + 1;
}

std::vector<double> frequency_axis(const StftConfig& config, double sample_rate) {
    std::vector<double> axis(static_cast<std::size_t>(config.bins()));
    for (std::size_t k = 0; k < axis.size(); ++k) axis[k] = static_cast<double>(k) * sample_rate / config.nfft;
    return axis;
}

BandFilter BandFilter::normalized(FilterNormalization kind) const {
    double scale = 0.0;
    if (kind == FilterNormalization::unit_max) {
        for (double r : response) scale = std::max(scale, r);
    } else {
        for (double r : response) scale += r * r;
        scale = std::sqrt(scale);
    }
    if (!(scale > 0.0)) throw Error("band filter response is identically zero");
    BandFilter out = *this;
    for (double& r : out.response) r /= scale;
    out.normalization = kind;
    return out;
}

Spectrogram stft(const Signal& signal, const StftConfig& config) {
    config.validate();
    const int frames = frame_count(signal.size(), config);
    if (frames < 1) throw Error("signal shorter than one STFT window");
    const auto m = static_cast<std::size_t>(config.window_length);
    const auto hop = static_cast<std::size_t>(config.hop());
    const auto window = make_window(config);

    Spectrogram out;
    out.config = config;
    out.sample_rate = signal.sample_rate();
    out.frames.resize(config.bins(), frames);
    out.freq_axis = frequency_axis(config, signal.sample_rate());
    out.time_axis.resize(static_cast<std::size_t>(frames));

    RealFft fft(static_cast<std::size_t>(config.nfft));
    std::vector<double> segment(m);
    std::vector<std::complex<double>> bins(fft.bins());
    const auto& x = signal.samples();
    for (int t = 0; t < frames; ++t) {
        const std::size_t start = static_cast<std::size_t>(t) * hop;
        for (std::size_t n = 0; n < m; ++n) segment[n] = x[start + n] * window[n];
        fft.forward(segment, bins);
        for (std::size_t k = 0; k < bins.size(); ++k) out.frames(static_cast<Eigen::Index>(k), t) = bins[k];
        out.time_axis[static_cast<std::size_t>(t)] = (static_cast<double>(start) + 0.5 * static_cast<double>(m)) /
                                                     signal.sample_rate();
    }
    out.power = out.frames.cwiseAbs2();
    return out;
}

Signal istft(const Eigen::MatrixXcd& frames, const StftConfig& config, double sample_rate) {
    config.validate();
    if (frames.cols() < 1) throw Error("istft needs at least one frame");
    if (frames.rows() != config.bins()) throw Error("istft frame height does not match nfft");
    const auto m = static_cast<std::size_t>(config.window_length);
    const auto hop = static_cast<std::size_t>(config.hop());
    const auto count = static_cast<std::size_t>(frames.cols());
    const std::size_t length = (count - 1) * hop + m;
    const auto window = make_window(config);

    std::vector<double> acc(length, 0.0);
    std::vector<double> norm(length, 0.0);
    RealFft fft(static_cast<std::size_t>(config.nfft));
    std::vector<std::complex<double>> bins(fft.bins());
    std::vector<double> time(fft.size());
    const double scale = 1.0 / config.nfft;
    for (std::size_t t = 0; t < count; ++t) {
        for (std::size_t k = 0; k < bins.size(); ++k) bins[k] = frames(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
        fft.inverse(bins, time);
        const std::size_t start = t * hop;
        for (std::size_t n = 0; n < m; ++n) {
            acc[start + n] += time[n] * scale * window[n];
            norm[start + n] += window[n] * window[n];
        }
    }
    for (std::size_t i = 0; i < length; ++i) acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
    return Signal(std::move(acc), sample_rate, "istft");
}

namespace {

Signal pad_to_frames(const Signal& signal, const StftConfig& config) {
    const auto m = static_cast<std::size_t>(config.window_length);
    const auto hop = static_cast<std::size_t>(config.hop());
    if (signal.size() < m) throw Error("signal shorter than one STFT window");
    const std::size_t span = signal.size() - m;
    const std::size_t padded = m + ((span + hop - 1) / hop) * hop;
    if (padded == signal.size()) return signal;
    std::vector<double> x(signal.samples());
    x.resize(padded, 0.0);
    return Signal(std::move(x), signal.sample_rate(), signal.label());
}

}  // namespace

FilterBank::FilterBank(const Signal& signal, const StftConfig& config)
    : padded_(stft(pad_to_frames(signal, config), config)), length_(signal.size()), label_(signal.label()) {}

Signal FilterBank::apply(const BandFilter& filter) const {
    if (static_cast<int>(filter.response.size()) != padded_.bins())
        throw Error("band filter bin count does not match the STFT configuration");
    const BandFilter unit = filter.normalized(FilterNormalization::unit_max);
    const Eigen::Map<const Eigen::VectorXd> mask(unit.response.data(), static_cast<Eigen::Index>(unit.response.size()));
    const Eigen::MatrixXcd masked = padded_.frames.array().colwise() * mask.cast<std::complex<double>>().array();
    Signal full = istft(masked, padded_.config, padded_.sample_rate);
    std::vector<double> out(full.samples().begin(), full.samples().begin() + static_cast<std::ptrdiff_t>(length_));
    return Signal(std::move(out), padded_.sample_rate, label_.empty() ? "filtered" : label_ + "_filtered");
}

Signal apply_band_filter(const Signal& signal, const BandFilter& filter, const StftConfig& config) {
    config.validate();
    if (static_cast<int>(filter.response.size()) != config.bins())
        throw Error("band filter bin count does not match the STFT configuration");
    return FilterBank(signal, config).apply(filter);
}

// ---------------------------------------------------------------------------
// Export

namespace {

void put_number(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

template <class T>
void put_le(std::ostream& out, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error("truncated spectrogram file");
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(T));
    }
    return v;
}

}  // namespace

void export_spectrogram_csv(const Spectrogram& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "freq_hz";
    for (double t : spec.time_axis) {
        out << ',';
        put_number(out, t);
    }
    out << '\n';
    for (Eigen::Index i = 0; i < spec.power.rows(); ++i) {
        put_number(out, spec.freq_axis[static_cast<std::size_t>(i)]);
        for (Eigen::Index t = 0; t < spec.power.cols(); ++t) {
            out << ',';
            put_number(out, spec.power(i, t));
        }
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

void export_spectrogram_binary(const Spectrogram& spec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write("SPGM", 4);
    put_le<std::uint32_t>(out, 1);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(spec.power.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(spec.power.cols()));
    put_le<double>(out, spec.sample_rate);
    for (double f : spec.freq_axis) put_le<double>(out, f);
    for (double t : spec.time_axis) put_le<double>(out, t);
    for (Eigen::Index i = 0; i < spec.power.rows(); ++i)
        for (Eigen::Index t = 0; t < spec.power.cols(); ++t) put_le<double>(out, spec.power(i, t));
    if (!out) throw Error("write failed: " + path.string());
}

PowerGrid import_spectrogram_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SPGM", 4) != 0) throw Error("not a spectrogram dump");
    if (get_le<std::uint32_t>(in) != 1) throw Error("unsupported spectrogram dump version");
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    PowerGrid grid;
    grid.sample_rate = get_le<double>(in);
    grid.freq_axis.resize(rows);
    grid.time_axis.resize(cols);
    for (auto& f : grid.freq_axis) f = get_le<double>(in);
    for (auto& t : grid.time_axis) t = get_le<double>(in);
    grid.power.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < grid.power.rows(); ++i)
        for (Eigen::Index t = 0; t < grid.power.cols(); ++t) grid.power(i, t) = get_le<double>(in);
    return grid;
}

}  // namespace ssonmf
