#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssonmf {

// Uniformly sampled real-valued series. Construction validates the invariants
// (rate > 0, at least one sample, all samples finite).
class Signal {
public:
    Signal(std::vector<double> samples, double sample_rate, std::string label = {});

    static Signal zeros(std::size_t length, double sample_rate, std::string label = {});

    const std::vector<double>& samples() const noexcept { return samples_; }
    std::span<const double> view() const noexcept { return samples_; }
    double sample_rate() const noexcept { return sample_rate_; }
    const std::string& label() const noexcept { return label_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double duration() const noexcept { return static_cast<double>(samples_.size()) / sample_rate_; }
    double operator[](std::size_t i) const noexcept { return samples_[i]; }

    Signal with_label(std::string label) const;

private:
    std::vector<double> samples_;
    double sample_rate_;
    std::string label_;
};

// Periodic damped-sinusoid impulse train (the fault signature).
struct SoiSpec {
    double amplitude = 3.0;
    double carrier_freq = 2500.0;  // Hz
    double damping = 800.0;        // 1/s
    double phase = 0.0;            // rad
    double fault_freq = 30.0;      // Hz, impulse repetition rate
    double duration = 2.5;         // s
};

// Resonance used to color the Gaussian background.
struct MachineResponse {
    double center_freq;  // Hz
    double quality;      // Q > 0
};

struct NoiseSpec {
    double gaussian_sigma = 0.5;
    double impulse_max_amplitude = 0.0;
    double impulse_carrier_freq = 6000.0;  // Hz
    double impulse_rate = 4.0;             // impulses per second, Poisson arrivals
    double impulse_damping = 2000.0;       // 1/s, ~2 ms bursts
    std::optional<MachineResponse> machine_response;
    std::uint64_t seed = 0;
};

struct NoiseComponents {
    Signal gaussian;
    Signal impulsive;
};

// Onset times m / fault_freq that fall inside [0, duration).
std::vector<double> soi_onsets(const SoiSpec& spec);

Signal generate_soi(const SoiSpec& spec, double sample_rate);

// Gaussian background and impulsive outliers drawn from independent streams of
// the same seed, so toggling one never perturbs the other.
NoiseComponents generate_noise_components(const NoiseSpec& spec, double duration, double sample_rate);
Signal generate_noise(const NoiseSpec& spec, double duration, double sample_rate);

Signal mix(std::span<const Signal> signals);
Signal mix(std::initializer_list<Signal> signals);

struct SpectralProfile {
    std::vector<double> values;
    double half_power_bandwidth;  // Hz
};

// Lorentzian spectral shape of a single damped sinusoid impulse.
SpectralProfile soi_spectral_profile(const SoiSpec& spec, std::span<const double> freq_axis);

// Band-pass resonance magnitude |F_n(f)|; unit gain at the center frequency.
double machine_response_gain(const MachineResponse& response, double freq);

enum class SignalFormat { wav, csv };
enum class WavEncoding { pcm16, pcm32, float32 };

SignalFormat format_from_path(const std::filesystem::path& path);

Signal load_signal(const std::filesystem::path& path, SignalFormat format);
Signal load_signal(const std::filesystem::path& path);

void save_csv(const Signal& signal, const std::filesystem::path& path);
// PCM encodings map [-1, 1) to full scale and clip outside it.
void save_wav(const Signal& signal, const std::filesystem::path& path,
              WavEncoding encoding = WavEncoding::float32);

}  // namespace ssonmf
