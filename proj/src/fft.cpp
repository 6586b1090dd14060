#include "ssonmf/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "ssonmf/error.hpp"

namespace ssonmf {

namespace {

// The FFTW planner is not reentrant; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw Error("FFT length must be positive");
    real_ = fftw_alloc_real(n);
    auto* spec = fftw_alloc_complex(n / 2 + 1);
    spec_ = spec;
    if (!real_ || !spec) {
        release();
        throw Error("FFT buffer allocation failed");
    }
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(n);
    forward_plan_ = fftw_plan_dft_r2c_1d(len, real_, spec, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_1d(len, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : n_(other.n_), real_(other.real_), spec_(other.spec_), forward_plan_(other.forward_plan_),
      inverse_plan_(other.inverse_plan_) {
    other.real_ = nullptr;
    other.spec_ = nullptr;
    other.forward_plan_ = nullptr;
    other.inverse_plan_ = nullptr;
}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
    if (this != &other) {
        release();
        n_ = other.n_;
        std::swap(real_, other.real_);
        std::swap(spec_, other.spec_);
        std::swap(forward_plan_, other.forward_plan_);
        std::swap(inverse_plan_, other.inverse_plan_);
    }
    return *this;
}

void RealFft::release() noexcept {
    std::lock_guard lock(planner_mutex());
    if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    if (real_) fftw_free(real_);
    if (spec_) fftw_free(spec_);
    forward_plan_ = inverse_plan_ = nullptr;
    real_ = nullptr;
    spec_ = nullptr;
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    if (in.size() > n_ || out.size() < bins()) throw Error("FFT buffer size mismatch");
    std::copy(in.begin(), in.end(), real_);
    std::fill(real_ + in.size(), real_ + n_, 0.0);
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    const auto* spec = static_cast<const fftw_complex*>(spec_);
    for (std::size_t k = 0; k < bins(); ++k) out[k] = {spec[k][0], spec[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    if (in.size() < bins() || out.size() < n_) throw Error("FFT buffer size mismatch");
    auto* spec = static_cast<fftw_complex*>(spec_);
    for (std::size_t k = 0; k < bins(); ++k) {
        spec[k][0] = in[k].real();
        spec[k][1] = in[k].imag();
    }
    // c2r destroys its input; spec_ is scratch.
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    std::copy(real_, real_ + n_, out.begin());
}

std::vector<std::complex<double>> complex_dft(std::span<const std::complex<double>> in, bool inverse) {
    const std::size_t n = in.size();
    if (n == 0) return {};
    fftw_complex* buf = fftw_alloc_complex(n);
    if (!buf) throw Error("FFT buffer allocation failed");
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) {
        buf[i][0] = in[i].real();
        buf[i][1] = in[i].imag();
    }
    fftw_execute(plan);
    std::vector<std::complex<double>> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = {buf[i][0], buf[i][1]};
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
    return out;
}

}  // namespace ssonmf
