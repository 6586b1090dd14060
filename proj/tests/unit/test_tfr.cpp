#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "helpers.hpp"
#include "ssonmf/error.hpp"
#include "ssonmf/tfr.hpp"

using namespace ssonmf;
using cd = std::complex<double>;
constexpr double pi = std::numbers::pi;

namespace {

Signal random_signal(std::size_t n, std::uint64_t seed, double fs = 25000.0) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = gaussian(rng);
    return Signal(std::move(x), fs);
}

double interior_rel_error(const Signal& a, const Signal& b, std::size_t margin) {
    double num = 0, den = 0;
    for (std::size_t i = margin; i + margin < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += a[i] * a[i];
    }
    return std::sqrt(num / den);
}

// Power of a known-frequency component, by correlation over the interior.
double tone_power(const Signal& s, double f, std::size_t margin) {
    cd acc = 0;
    std::size_t n = 0;
    for (std::size_t i = margin; i + margin < s.size(); ++i, ++n)
        acc += s[i] * std::polar(1.0, -2 * pi * f * i / s.sample_rate());
    return std::norm(acc) / (n * double(n));
}

BandFilter flat(int bins, double value, double fs) {
    BandFilter f;
    f.response.assign(bins, value);
    f.freq_axis = frequency_axis(StftConfig{}, fs);
    return f;
}

}  // namespace

TEST_CASE("config validation and defaults") {
    StftConfig c;
    CHECK(c.hop() == 28);
    CHECK(c.bins() == 257);
    CHECK_NOTHROW(c.validate());
    StftConfig bad = c;
    bad.overlap = 128;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.overlap = -1;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = c;
    bad.nfft = 64;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("symmetric hamming window") {
    const auto w = make_window(StftConfig{});
    REQUIRE(w.size() == 128);
    CHECK(w[0] == doctest::Approx(0.08));
    CHECK(w[127] == doctest::Approx(0.08));
    for (int n = 0; n < 64; ++n) CHECK(w[n] == doctest::Approx(w[127 - n]).epsilon(1e-14));
}

TEST_CASE("frame arithmetic for 1028 samples") {
    const Signal s = random_signal(1028, 1);
    const Spectrogram sp = stft(s, StftConfig{});
    CHECK(sp.bins() == 257);
    CHECK(sp.frame_count() == 33);
    CHECK(frame_count(1028, StftConfig{}) == 33);
    CHECK(sp.freq_axis.front() == 0.0);
    CHECK(sp.freq_axis.back() == doctest::Approx(12500.0));
    CHECK(sp.time_axis.size() == 33);
    CHECK_THROWS_AS(stft(random_signal(127, 1), StftConfig{}), Error);
}

TEST_CASE("zero signal gives zero power") {
    const Spectrogram sp = stft(Signal::zeros(2000, 25000.0), StftConfig{});
    CHECK(sp.power.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frames agree with a direct DFT of the windowed segment") {
    const Signal s = random_signal(600, 4);
    const StftConfig c;
    const Spectrogram sp = stft(s, c);
    const auto w = make_window(c);
    for (int t : {0, 7, sp.frame_count() - 1}) {
        for (int k : {0, 1, 50, 200, 256}) {
            cd acc = 0;
            for (int n = 0; n < c.window_length; ++n)
                acc += w[n] * s[t * c.hop() + n] * std::polar(1.0, -2 * pi * k * n / c.nfft);
            CHECK(std::abs(sp.frames(k, t) - acc) < 1e-10 * (1 + std::abs(acc)));
            CHECK(sp.power(k, t) == doctest::Approx(std::norm(sp.frames(k, t))).epsilon(1e-14));
        }
    }
}

TEST_CASE("bin-centered tone stays inside the window's main lobe") {
    // resolution bins of width fs / window_length (4 DFT bins at nfft = 512)
    const StftConfig c;
    const double fs = 25000.0;
    const int k0 = 100;
    const double f = k0 * fs / c.nfft;
    std::vector<double> x(4000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * pi * f * i / fs);
    const Spectrogram sp = stft(Signal(x, fs), c);
    const int half = 2 * c.nfft / c.window_length;
    for (int t = 0; t < sp.frame_count(); ++t) {
        const double total = sp.power.col(t).sum();
        const double near = sp.power.col(t).segment(k0 - half, 2 * half + 1).sum();
        CHECK(near / total >= 0.95);
    }
}

TEST_CASE("per-frame parseval") {
    const StftConfig c;
    const Signal s = random_signal(1000, 8);
    const Spectrogram sp = stft(s, c);
    const auto w = make_window(c);
    for (int t = 0; t < sp.frame_count(); ++t) {
        double energy = 0;
        for (int n = 0; n < c.window_length; ++n) energy += std::pow(w[n] * s[t * c.hop() + n], 2);
        double one_sided = sp.power(0, t) + sp.power(c.nfft / 2, t);
        for (int k = 1; k < c.nfft / 2; ++k) one_sided += 2 * sp.power(k, t);
        CHECK(one_sided / c.nfft == doctest::Approx(energy).epsilon(1e-6));
    }
}

TEST_CASE("stft is linear") {
    const Signal a = random_signal(900, 2), b = random_signal(900, 3);
    std::vector<double> mixv(900);
    for (int i = 0; i < 900; ++i) mixv[i] = 2.0 * a[i] - 0.5 * b[i];
    const auto fa = stft(a, StftConfig{}).frames, fb = stft(b, StftConfig{}).frames;
    const auto fm = stft(Signal(mixv, 25000.0), StftConfig{}).frames;
    CHECK((fm - (2.0 * fa - 0.5 * fb)).norm() < 1e-10 * fm.norm());
}

TEST_CASE("istft round trip and shape") {
    const StftConfig c;
    const Signal s = random_signal(3000, 5);
    const Spectrogram sp = stft(s, c);
    const Signal back = istft(sp.frames, c, s.sample_rate());
    CHECK(back.size() == std::size_t((sp.frame_count() - 1) * c.hop() + c.window_length));
    CHECK(interior_rel_error(Signal(std::vector<double>(s.samples().begin(), s.samples().begin() + back.size()),
                                    s.sample_rate()),
                             back, c.window_length) < 1e-8);

    const Eigen::MatrixXcd one = Eigen::MatrixXcd::Zero(c.bins(), 1);
    const Signal z = istft(one, c, 25000.0);
    CHECK(z.size() == 128);
    for (double v : z.samples()) CHECK(v == 0.0);
    CHECK_THROWS_AS(istft(Eigen::MatrixXcd::Zero(c.bins(), 0), c, 25000.0), Error);
    CHECK_THROWS_AS(istft(Eigen::MatrixXcd::Zero(100, 3), c, 25000.0), Error);
}

TEST_CASE("istft is linear in the frames") {
    const StftConfig c;
    const Eigen::MatrixXd re1 = testutil::gaussian_matrix(c.bins(), 12, 1), im1 = testutil::gaussian_matrix(c.bins(), 12, 2);
    const Eigen::MatrixXd re2 = testutil::gaussian_matrix(c.bins(), 12, 3), im2 = testutil::gaussian_matrix(c.bins(), 12, 4);
    Eigen::MatrixXcd f1(c.bins(), 12), f2(c.bins(), 12);
    f1.real() = re1;
    f1.imag() = im1;
    f2.real() = re2;
    f2.imag() = im2;
    const double a = 1.7, b = -0.3;
    const Signal lhs = istft(a * f1 + b * f2, c, 1000.0);
    const Signal s1 = istft(f1, c, 1000.0), s2 = istft(f2, c, 1000.0);
    for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(std::abs(lhs[i] - (a * s1[i] + b * s2[i])) < 1e-10);
}

TEST_CASE("identity mask reproduces the signal") {
    const StftConfig c;
    const Signal s = random_signal(5000, 12);
    const Signal out = apply_band_filter(s, flat(c.bins(), 1.0, s.sample_rate()), c);
    CHECK(out.size() == s.size());
    CHECK(interior_rel_error(s, out, c.window_length) < 1e-8);
    // unit-max normalization makes any constant response an identity mask
    const Signal out2 = apply_band_filter(s, flat(c.bins(), 0.25, s.sample_rate()), c);
    CHECK(interior_rel_error(s, out2, c.window_length) < 1e-8);
}

TEST_CASE("single-bin mask on a zero signal") {
    const StftConfig c;
    BandFilter f = flat(c.bins(), 0.0, 25000.0);
    f.response[40] = 1.0;
    const Signal out = apply_band_filter(Signal::zeros(3000, 25000.0), f, c);
    for (double v : out.samples()) CHECK(v == 0.0);
    BandFilter wrong = f;
    wrong.response.resize(100);
    wrong.freq_axis.resize(100);
    CHECK_THROWS_AS(apply_band_filter(Signal::zeros(3000, 25000.0), wrong, c), Error);
    CHECK_THROWS_AS(flat(c.bins(), 0.0, 25000.0).normalized(FilterNormalization::unit_max), Error);
}

TEST_CASE("band-pass around 5 kHz removes a 500 Hz tone") {
    const StftConfig c;
    const double fs = 25000.0;
    std::vector<double> x(25000);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::sin(2 * pi * 500.0 * i / fs) + std::sin(2 * pi * 5000.0 * i / fs);
    const Signal s(x, fs);
    BandFilter f = flat(c.bins(), 0.0, fs);
    for (int k = 0; k < c.bins(); ++k)
        if (std::abs(f.freq_axis[k] - 5000.0) <= 1000.0) f.response[k] = 1.0;
    const Signal out = apply_band_filter(s, f, c);
    const double in_p = tone_power(s, 500.0, c.window_length);
    const double out_p = tone_power(out, 500.0, c.window_length);
    CHECK(10 * std::log10(in_p / out_p) >= 40.0);
    // the pass-band tone survives
    CHECK(tone_power(out, 5000.0, c.window_length) == doctest::Approx(tone_power(s, 5000.0, c.window_length)).epsilon(0.01));
}

TEST_CASE("cascaded masks") {
    const StftConfig c;
    const Signal s = random_signal(6000, 21);
    BandFilter r1 = flat(c.bins(), 0.0, s.sample_rate()), r2 = r1, prod = r1, id = r1;
    for (int k = 0; k < c.bins(); ++k) {
        r1.response[k] = std::exp(-std::pow((k - 100) / 30.0, 2));
        r2.response[k] = std::exp(-std::pow((k - 100) / 50.0, 2));
        prod.response[k] = r1.response[k] * r2.response[k];
        id.response[k] = 1.0;
    }
    const Signal once = apply_band_filter(s, r1, c);
    // a filtered signal passes the identity mask unchanged
    CHECK(interior_rel_error(apply_band_filter(once, id, c), once, c.window_length) < 1e-8);
    // two different masks only approximate their product: overlapping frames
    // smear the first mask before the second is applied
    const Signal two = apply_band_filter(once, r2, c);
    const Signal one = apply_band_filter(s, prod, c);
    CHECK(interior_rel_error(one, two, c.window_length) < 1e-2);
}

TEST_CASE("filter bank matches apply_band_filter") {
    const StftConfig c;
    const Signal s = random_signal(4321, 17);
    BandFilter f = flat(c.bins(), 0.0, s.sample_rate());
    for (int k = 60; k < 90; ++k) f.response[k] = 0.5 + 0.01 * k;
    const FilterBank bank(s, c);
    const Signal a = bank.apply(f), b = apply_band_filter(s, f, c);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("spectrogram exports") {
    const auto dir = testutil::scratch_dir("spgm");
    const Spectrogram sp = stft(random_signal(800, 30), StftConfig{});
    export_spectrogram_binary(sp, dir / "s.bin");
    const PowerGrid g = import_spectrogram_binary(dir / "s.bin");
    CHECK(g.power == sp.power);
    CHECK(g.freq_axis == sp.freq_axis);
    CHECK(g.time_axis == sp.time_axis);
    CHECK(g.sample_rate == sp.sample_rate);
    CHECK(std::filesystem::file_size(dir / "s.bin") ==
          4 + 4 + 8 + 8 + 8 + 8 * (sp.bins() + sp.frame_count() + sp.bins() * sp.frame_count()));
    export_spectrogram_csv(sp, dir / "s.csv");
    CHECK(std::filesystem::file_size(dir / "s.csv") > 0);
    { std::ofstream(dir / "junk.bin") << "nope"; }
    CHECK_THROWS_AS(import_spectrogram_binary(dir / "junk.bin"), Error);
}
