#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ssonmf/signal.hpp"

namespace ssonmf {

enum class WindowKind { hamming };

struct StftConfig {
    int window_length = 128;
    int overlap = 100;
    int nfft = 512;
    WindowKind window_kind = WindowKind::hamming;

    int hop() const noexcept { return window_length - overlap; }
    int bins() const noexcept { return nfft / 2 + 1; }
    void validate() const;
};

// Symmetric window of the configured length.
std::vector<double> make_window(const StftConfig& config);

// Number of full frames for a signal of `length` samples.
int frame_count(std::size_t length, const StftConfig& config);

struct Spectrogram {
    Eigen::MatrixXcd frames;  // bins x frames
    Eigen::MatrixXd power;    // |frames|^2
    std::vector<double> freq_axis;
    std::vector<double> time_axis;  // frame centers
    StftConfig config;
    double sample_rate = 0.0;

    int bins() const noexcept { return static_cast<int>(power.rows()); }
    int frame_count() const noexcept { return static_cast<int>(power.cols()); }
};

enum class FilterNormalization { unit_l2, unit_max };

// Magnitude frequency response over the one-sided STFT bins.
struct BandFilter {
    std::vector<double> response;
    std::vector<double> freq_axis;
    FilterNormalization normalization = FilterNormalization::unit_max;

    // Rescaled copy; throws if the response is identically zero.
    BandFilter normalized(FilterNormalization kind) const;
};

std::vector<double> frequency_axis(const StftConfig& config, double sample_rate);

Spectrogram stft(const Signal& signal, const StftConfig& config);

// Weighted overlap-add synthesis normalized by the summed squared window.
// Output length is (frames - 1) * hop + window_length.
Signal istft(const Eigen::MatrixXcd& frames, const StftConfig& config, double sample_rate);

// Masks every STFT frame with the unit-max normalized response and
// resynthesizes. Output has the input length; the tail is covered by a
// zero-padded final frame.
Signal apply_band_filter(const Signal& signal, const BandFilter& filter, const StftConfig& config);

// Analyzes a signal once and applies any number of band filters to it; each
// apply() matches apply_band_filter on the same inputs.
class FilterBank {
public:
    FilterBank(const Signal& signal, const StftConfig& config);
    Signal apply(const BandFilter& filter) const;
    const Spectrogram& padded_spectrogram() const noexcept { return padded_; }

private:
    Spectrogram padded_;
    std::size_t length_;
    std::string label_;
};

void export_spectrogram_csv(const Spectrogram& spec, const std::filesystem::path& path);

// Little-endian layout:
//   char[4] "SPGM", u32 version (=1), u64 bins, u64 frames, f64 sample_rate,
//   f64[bins] freq_axis, f64[frames] time_axis, f64[bins*frames] power (row-major)
void export_spectrogram_binary(const Spectrogram& spec, const std::filesystem::path& path);

struct PowerGrid {
    Eigen::MatrixXd power;
    std::vector<double> freq_axis;
    std::vector<double> time_axis;
    double sample_rate = 0.0;
};
PowerGrid import_spectrogram_binary(const std::filesystem::path& path);

}  // namespace ssonmf
