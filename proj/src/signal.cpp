#include "ssonmf/signal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ssonmf/error.hpp"
#include "ssonmf/fft.hpp"
#include "ssonmf/random.hpp"

namespace ssonmf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t sample_count(double duration, double sample_rate) {
    if (!(duration > 0.0)) throw Error("duration must be positive");
    if (!(sample_rate > 0.0)) throw Error("sample rate must be positive");
    const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
    if (n == 0) throw Error("duration shorter than one sample");
    return n;
}

void check_soi(const SoiSpec& spec, double sample_rate) {
    if (!(spec.amplitude >= 0.0)) throw Error("SOI amplitude must be non-negative");
    if (!(spec.carrier_freq < 0.5 * sample_rate)) throw Error("SOI carrier frequency must be below Nyquist");
    if (!(spec.damping > 0.0)) throw Error("SOI damping must be positive");
    if (!(spec.fault_freq > 0.0)) throw Error("fault frequency must be positive");
    if (!(spec.fault_freq < spec.carrier_freq)) throw Error("fault frequency must be below the carrier");
}

// Adds one damped sinusoid starting at `onset` seconds.
void add_burst(std::vector<double>& out, double sample_rate, double onset, double amplitude, double damping,
               double freq, double phase) {
    const auto first = static_cast<std::size_t>(std::ceil(onset * sample_rate - 1e-9));
    for (std::size_t i = first; i < out.size(); ++i) {
        const double dt = static_cast<double>(i) / sample_rate - onset;
        const double decay = damping * dt;
        if (decay > 745.0) break;  // exp underflows to zero
        out[i] += amplitude * std::exp(-decay) * std::sin(kTwoPi * freq * dt + phase);
    }
}

}  // namespace

Signal::Signal(std::vector<double> samples, double sample_rate, std::string label)
    : samples_(std::move(samples)), sample_rate_(sample_rate), label_(std::move(label)) {
    if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_)) throw Error("sample rate must be positive");
    if (samples_.empty()) throw Error("empty signal");
    if (!std::all_of(samples_.begin(), samples_.end(), [](double x) { return std::isfinite(x); }))
        throw Error("signal contains non-finite samples");
}

Signal Signal::zeros(std::size_t length, double sample_rate, std::string label) {
    return Signal(std::vector<double>(length, 0.0), sample_rate, std::move(label));
}

Signal Signal::with_label(std::string label) const {
    Signal copy = *this;
    copy.label_ = std::move(label);
    return copy;
}

std::vector<double> soi_onsets(const SoiSpec& spec) {
    if (!(spec.duration > 0.0)) throw Error("duration must be positive");
    if (!(spec.fault_freq > 0.0)) throw Error("fault frequency must be positive");
    const double period = 1.0 / spec.fault_freq;
    const auto count = static_cast<long long>(std::ceil(spec.duration * spec.fault_freq - 1e-9));
    std::vector<double> onsets;
    onsets.reserve(static_cast<std::size_t>(count));
    for (long long m = 0; m < count; ++m) onsets.push_back(static_cast<double>(m) * period);
    return onsets;
}

Signal generate_soi(const SoiSpec& spec, double sample_rate) {
    check_soi(spec, sample_rate);
    std::vector<double> out(sample_count(spec.duration, sample_rate), 0.0);
    if (spec.amplitude > 0.0) {
        for (double onset : soi_onsets(spec))
            add_burst(out, sample_rate, onset, spec.amplitude, spec.damping, spec.carrier_freq, spec.phase);
    }
    return Signal(std::move(out), sample_rate, "soi");
}

double machine_response_gain(const MachineResponse& response, double freq) {
    const double fn = response.center_freq;
    const double q = response.quality;
    const double f = std::abs(freq);
    if (f == 0.0) return 0.0;
    const double d = fn * fn - f * f;
    return fn * f / (q * std::sqrt(d * d + f * f * fn * fn / (q * q)));
}

NoiseComponents generate_noise_components(const NoiseSpec& spec, double duration, double sample_rate) {
    if (!(spec.gaussian_sigma >= 0.0)) throw Error("Gaussian sigma must be non-negative");
    if (!(spec.impulse_max_amplitude >= 0.0)) throw Error("impulse amplitude must be non-negative");
    if (spec.impulse_max_amplitude > 0.0) {
        if (!(spec.impulse_carrier_freq < 0.5 * sample_rate) || !(spec.impulse_carrier_freq > 0.0))
            throw Error("impulse carrier frequency must lie in (0, Nyquist)");
        if (!(spec.impulse_rate > 0.0)) throw Error("impulse rate must be positive");
        if (!(spec.impulse_damping > 0.0)) throw Error("impulse damping must be positive");
    }
    if (spec.machine_response && !(spec.machine_response->quality > 0.0))
        throw Error("machine response quality must be positive");

    const std::size_t n = sample_count(duration, sample_rate);

    std::vector<double> gauss(n, 0.0);
    if (spec.gaussian_sigma > 0.0) {
        Rng rng(derive_seed(spec.seed, 1));
        for (auto& x : gauss) x = spec.gaussian_sigma * gaussian(rng);
        if (spec.machine_response) {
            RealFft fft(n);
            std::vector<std::complex<double>> bins(fft.bins());
            fft.forward(gauss, bins);
            for (std::size_t k = 0; k < bins.size(); ++k) {
                const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
                bins[k] *= machine_response_gain(*spec.machine_response, f) / static_cast<double>(n);
            }
            fft.inverse(bins, gauss);
        }
    }

    std::vector<double> impulses(n, 0.0);
    if (spec.impulse_max_amplitude > 0.0) {
        Rng rng(derive_seed(spec.seed, 2));
        double t = 0.0;
        while (true) {
            t += -std::log1p(-uniform01(rng)) / spec.impulse_rate;
            if (t >= duration) break;
            const double amp = spec.impulse_max_amplitude * (1.0 - uniform01(rng));  // (0, max]
            const double phase = kTwoPi * uniform01(rng);
            add_burst(impulses, sample_rate, t, amp, spec.impulse_damping, spec.impulse_carrier_freq, phase);
        }
    }

    return {Signal(std::move(gauss), sample_rate, "gaussian"), Signal(std::move(impulses), sample_rate, "impulsive")};
}

Signal generate_noise(const NoiseSpec& spec, double duration, double sample_rate) {
    auto parts = generate_noise_components(spec, duration, sample_rate);
    return mix({parts.gaussian, parts.impulsive}).with_label("noise");
}

Signal mix(std::span<const Signal> signals) {
    if (signals.empty()) throw Error("nothing to mix");
    const auto& first = signals.front();
    std::vector<double> out(first.samples());
    for (std::size_t s = 1; s < signals.size(); ++s) {
        const auto& sig = signals[s];
        if (sig.sample_rate() != first.sample_rate()) throw Error("sample rate mismatch in mix");
        if (sig.size() != first.size()) throw Error("length mismatch in mix");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sig[i];
    }
    return Signal(std::move(out), first.sample_rate(), "mix");
}

Signal mix(std::initializer_list<Signal> signals) {
    return mix(std::span<const Signal>(signals.begin(), signals.size()));
}

SpectralProfile soi_spectral_profile(const SoiSpec& spec, std::span<const double> freq_axis) {
    if (!std::is_sorted(freq_axis.begin(), freq_axis.end())) throw Error("frequency axis must be ascending");
    if (!(spec.damping > 0.0)) throw Error("SOI damping must be positive");
    const double a2 = spec.amplitude * spec.amplitude;
    const double alpha2 = spec.damping * spec.damping;
    const double pi = std::numbers::pi;
    SpectralProfile out;
    out.values.reserve(freq_axis.size());
    for (double f : freq_axis) {
        const double df = f - spec.carrier_freq;
        out.values.push_back(a2 / (8.0 * pi * (alpha2 + 4.0 * pi * pi * df * df)));
    }
    out.half_power_bandwidth = spec.damping * std::sqrt(std::sqrt(2.0) - 1.0) / pi;
    return out;
}

// ---------------------------------------------------------------------------
// File I/O

SignalFormat format_from_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") return SignalFormat::wav;
    if (ext == ".csv") return SignalFormat::csv;
    throw Error("cannot infer signal format from extension '" + ext + "'");
}

namespace {

Signal load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error("empty signal");
    const std::string key = "sample_rate=";
    if (line.rfind(key, 0) != 0) throw Error("malformed header: expected 'sample_rate=<Hz>'");
    const std::string value = line.substr(key.size());
    char* end = nullptr;
    const double rate = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || std::string_view(end).find_first_not_of(" \r\t") != std::string_view::npos)
        throw Error("malformed header: bad sample rate");
    if (!(rate > 0.0)) throw Error("malformed header: sample rate must be positive");

    std::vector<double> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || std::string_view(end).find_first_not_of(" \r\t") != std::string_view::npos)
            throw Error("malformed sample on line " + std::to_string(line_no));
        if (!std::isfinite(v)) throw Error("non-finite sample on line " + std::to_string(line_no));
        samples.push_back(v);
    }
    if (samples.empty()) throw Error("empty signal");
    return Signal(std::move(samples), rate, path.stem().string());
}

template <class T>
T read_le(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(T));
    }
    return v;
}

template <class T>
void write_le(std::ostream& out, T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(T));
    }
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

Signal load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 || std::memcmp(data.data() + 8, "WAVE", 4) != 0)
        throw Error("not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* samples = nullptr;
    std::size_t sample_bytes = 0;
    std::size_t pos = 12;
    while (pos + 8 <= data.size()) {
        const auto size = read_le<std::uint32_t>(&data[pos + 4]);
        const std::size_t body = pos + 8;
        if (body + size > data.size()) throw Error("truncated WAV chunk");
        if (std::memcmp(&data[pos], "fmt ", 4) == 0) {
            if (size < 16) throw Error("malformed WAV fmt chunk");
            format = read_le<std::uint16_t>(&data[body]);
            channels = read_le<std::uint16_t>(&data[body + 2]);
            rate = read_le<std::uint32_t>(&data[body + 4]);
            bits = read_le<std::uint16_t>(&data[body + 14]);
            if (format == 0xFFFE && size >= 26) format = read_le<std::uint16_t>(&data[body + 24]);
        } else if (std::memcmp(&data[pos], "data", 4) == 0) {
            samples = &data[body];
            sample_bytes = size;
        }
        pos = body + size + (size & 1u);
    }
    if (format == 0 || samples == nullptr) throw Error("WAV file lacks fmt or data chunk");
    if (channels != 1) throw Error("only mono WAV files are supported");
    if (rate == 0) throw Error("WAV sample rate is zero");

    std::vector<double> out;
    if (format == 1 && bits == 16) {
        for (std::size_t i = 0; i + 2 <= sample_bytes; i += 2)
            out.push_back(read_le<std::int16_t>(samples + i) / 32768.0);
    } else if (format == 1 && bits == 32) {
        for (std::size_t i = 0; i + 4 <= sample_bytes; i += 4)
            out.push_back(read_le<std::int32_t>(samples + i) / 2147483648.0);
    } else if (format == 3 && bits == 32) {
        for (std::size_t i = 0; i + 4 <= sample_bytes; i += 4) out.push_back(read_le<float>(samples + i));
    } else if (format == 3 && bits == 64) {
        for (std::size_t i = 0; i + 8 <= sample_bytes; i += 8) out.push_back(read_le<double>(samples + i));
    } else {
        throw Error("unsupported WAV encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                    " bits)");
    }
    if (out.empty()) throw Error("empty signal");
    return Signal(std::move(out), static_cast<double>(rate), path.stem().string());
}

}  // namespace

Signal load_signal(const std::filesystem::path& path, SignalFormat format) {
    if (!std::filesystem::exists(path)) throw Error("missing file: " + path.string());
    return format == SignalFormat::csv ? load_csv(path) : load_wav(path);
}

Signal load_signal(const std::filesystem::path& path) { return load_signal(path, format_from_path(path)); }

void save_csv(const Signal& signal, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", signal.sample_rate());
    out << "sample_rate=" << buf << '\n';
    for (double x : signal.samples()) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

void save_wav(const Signal& signal, const std::filesystem::path& path, WavEncoding encoding) {
    const double rate = signal.sample_rate();
    if (rate != std::round(rate) || rate > 4294967295.0) throw Error("WAV requires an integral sample rate");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());

    const std::uint16_t format = encoding == WavEncoding::float32 ? 3 : 1;
    const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
    const std::uint32_t block = bits / 8;
    const auto data_bytes = static_cast<std::uint32_t>(signal.size() * block);

    out.write("RIFF", 4);
    write_le<std::uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<std::uint32_t>(out, 16);
    write_le<std::uint16_t>(out, format);
    write_le<std::uint16_t>(out, 1);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate) * block);
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(block));
    write_le<std::uint16_t>(out, bits);
    out.write("data", 4);
    write_le<std::uint32_t>(out, data_bytes);
    for (double x : signal.samples()) {
        switch (encoding) {
            case WavEncoding::float32:
                write_le<float>(out, static_cast<float>(x));
                break;
            case WavEncoding::pcm16:
                write_le<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(std::lround(x * 32768.0), -32768L, 32767L)));
                break;
            case WavEncoding::pcm32: {
                const double v = std::clamp(std::round(x * 2147483648.0), -2147483648.0, 2147483647.0);
                write_le<std::int32_t>(out, static_cast<std::int32_t>(v));
                break;
            }
        }
    }
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace ssonmf
