#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ssonmf {

// Real <-> half-complex DFT of a fixed length backed by FFTW. Each instance owns
// its buffers and plans, so distinct instances may run on different threads.
class RealFft {
public:
    explicit RealFft(std::size_t n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    RealFft(RealFft&& other) noexcept;
    RealFft& operator=(RealFft&& other) noexcept;

    std::size_t size() const noexcept { return n_; }
    std::size_t bins() const noexcept { return n_ / 2 + 1; }

    // Unnormalized forward transform; `in` shorter than n is zero-padded.
    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    // Unnormalized inverse (result is n times the true inverse).
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    void release() noexcept;

    std::size_t n_ = 0;
    double* real_ = nullptr;
    void* spec_ = nullptr;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

// Full complex DFT, used for analytic-signal construction.
std::vector<std::complex<double>> complex_dft(std::span<const std::complex<double>> in, bool inverse);

}  // namespace ssonmf
