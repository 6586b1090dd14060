// Acceptance suite. One PASS/FAIL line per criterion; pass criterion numbers as
// arguments to run a subset. Exit status is nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssonmf/config.hpp"
#include "ssonmf/diagnostics.hpp"
#include "ssonmf/factorize.hpp"
#include "ssonmf/harness.hpp"
#include "ssonmf/tfr.hpp"

#ifndef SSONMF_CLI_PATH
#define SSONMF_CLI_PATH "ssonmf"
#endif

namespace fs = std::filesystem;
using namespace ssonmf;
using Eigen::MatrixXd;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Inputs come from the standard library generators so the oracles do not share
// the library's own RNG code.
MatrixXd uniform_input(int rows, int cols, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = u(gen);
    return m;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("ssonmf_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------

Outcome orthogonality() {
    std::mt19937_64 gen(101);
    int ok = 0;
    double worst = 0.0;
    std::string first_problem;
    for (int n = 0; n < 100; ++n) {
        const MatrixXd Y = uniform_input(100, 60, gen);
        SsOnmfConfig c;
        c.rank = 6;
        c.tsvd_rank = 6;
        c.seed = 1000 + n;
        FactorModel m;
        try {
            m = ss_onmf(Y, c);
        } catch (const std::exception& e) {
            if (first_problem.empty()) first_problem = e.what();
            continue;
        }
        const double err = (m.W.transpose() * m.W - MatrixXd::Identity(m.W.cols(), m.W.cols())).norm();
        worst = std::max(worst, err);

        std::vector<int> l;
        for (int r = 0; r < m.W.cols(); ++r) l.push_back(static_cast<int>((m.W.col(r).array() != 0.0).count()));
        const int nonempty = static_cast<int>(std::count_if(l.begin(), l.end(), [](int v) { return v > 0; }));
        const auto [lo, hi] = std::minmax_element(l.begin(), l.end());
        double mean = 0.0;
        for (int v : l) mean += v;
        mean /= static_cast<double>(l.size());
        const double floor = c.min_bandwidth * 100.0;
        const bool wide = std::all_of(l.begin(), l.end(), [&](int v) { return v > floor; });
        const bool uneven = static_cast<double>(*hi - *lo) > mean;
        const bool nonneg = (m.W.array() >= 0.0).all();
        if (err < 1e-12 && nonempty > 1 && wide && uneven && nonneg && m.objective > 0.0)
            ++ok;
        else if (first_problem.empty())
            first_problem = fmt("instance %d: ortho %.3g, nonempty %d", n, err, nonempty);
    }
    std::string d = fmt("%d/100 satisfy every gate, worst ||W'W-I|| %.2e", ok, worst);
    if (!first_problem.empty()) d += "; first problem: " + first_problem;
    return {ok == 100, d};
}

// Exhaustive search in exact integer arithmetic: every row joins at most one
// column with a non-negative entry, w_r is q_r restricted to its rows and
// normalized, objective sum_r <q_r, w_r>^2 = sum_r (sum q^2)^2 / sum q^2.
long long exhaustive_psi(const std::vector<std::vector<long long>>& q, int R) {
    const int I = static_cast<int>(q.size());
    std::vector<int> pick(I, 0);
    long long best = 0;
    while (true) {
        bool ok = true;
        long long total = 0;
        for (int r = 0; r < R && ok; ++r) {
            long long ss = 0;
            for (int i = 0; i < I; ++i)
                if (pick[i] == r + 1) {
                    if (q[i][r] < 0) ok = false;
                    ss += q[i][r] * q[i][r];
                }
            if (ss > 0) total += (ss * ss) / ss;
        }
        if (ok) best = std::max(best, total);
        int i = 0;
        while (i < I && ++pick[i] > R) pick[i++] = 0;
        if (i == I) break;
    }
    return best;
}

Outcome update_w_brute_force() {
    std::mt19937_64 gen(202);
    std::uniform_int_distribution<int> dim_i(1, 8), dim_r(1, 3), entry(-9, 9);
    int equal = 0;
    std::string first;
    for (int n = 0; n < 200; ++n) {
        const int I = dim_i(gen), R = dim_r(gen);
        std::vector<std::vector<long long>> q(I, std::vector<long long>(R));
        MatrixXd Q(I, R);
        for (int i = 0; i < I; ++i)
            for (int r = 0; r < R; ++r) Q(i, r) = static_cast<double>(q[i][r] = entry(gen));
        const long long want = exhaustive_psi(q, R);
        const double got = update_w(Q).psi;
        if (got == static_cast<double>(want))
            ++equal;
        else if (first.empty())
            first = fmt("; instance %d (%dx%d): %.17g vs %lld", n, I, R, got, want);
    }
    return {equal == 200, fmt("%d/200 exact matches, integer entries in [-9, 9]", equal) + first};
}

Outcome recovery(const std::string& preset_name, double tol_hz, double need, bool require_gain, Criterion crit) {
    ExperimentConfig c = preset(preset_name);
    c.ranks = {10, 10};
    c.trials = 25;
    c.criterion = crit;
    const McResult r = rank_sweep(c);
    int succeeded = 0, inside = 0, gains = 0;
    for (const auto& t : r.trials) {
        if (!t.ok) continue;
        ++succeeded;
        inside += std::abs(t.centroid - 2500.0) <= tol_hz;
        gains += t.kurtosis > r.raw_kurtosis;
    }
    const double frac = static_cast<double>(inside) / 25.0;
    bool pass = frac >= need;
    if (require_gain) pass = pass && succeeded > 0 && gains == succeeded;
    return {pass, fmt("%d/25 centroids within 2500 +- %.0f Hz (need %.0f%%), kurtosis gain %d/%d, raw kurtosis %.3f, "
                      "median filtered %.3f",
                      inside, tol_hz, need * 100.0, gains, succeeded, r.raw_kurtosis, r.summary(10).stats.median)};
}

Outcome nongaussian_separation() {
    ExperimentConfig c = preset("nongauss_5_0.5");
    c.ranks = {10, 10};
    c.trials = 25;
    const McResult r = rank_sweep(c);
    const auto& s = r.summary(10);
    if (s.median_trial < 0) return {false, "every trial failed"};
    const auto& med = r.trial(10, s.median_trial);
    const double soi = band_energy_fraction(med.filter, 2000.0, 3000.0);
    const double imp = band_energy_fraction(med.filter, 5500.0, 6500.0);
    int gains = 0;
    for (const auto& t : r.trials) gains += t.ok && t.envsi > r.raw_envsi;
    const bool pass = soi >= 0.7 && imp <= 0.1 && gains >= 23;  // 90% of 25 is 22.5
    return {pass, fmt("median-trial filter energy %.3f in 2.5+-0.5 kHz, %.3f in 6+-0.5 kHz; ENVSI gain %d/25 "
                      "(raw %.3f, median filtered %.3f)",
                      soi, imp, gains, r.raw_envsi, s.stats.median)};
}

Outcome robustness_ordering() {
    ExperimentConfig c = preset("gauss_0.5");
    c.ranks = {10, 15};
    c.trials = 25;
    const Signal signal = build_signal(c);
    ExperimentConfig a = c, b = c;
    a.method = Method::ss_onmf;
    b.method = Method::onmfs;
    const McResult ra = rank_sweep(Experiment(a, signal));
    const McResult rb = rank_sweep(Experiment(b, signal));
    bool pass = true;
    std::string d = "median kurtosis ss_onmf/onmfs:";
    for (int rank = 10; rank <= 15; ++rank) {
        const double x = ra.summary(rank).stats.median, y = rb.summary(rank).stats.median;
        pass = pass && ra.summary(rank).succeeded > 0 && rb.summary(rank).succeeded > 0 && x >= y;
        d += fmt(" R%d %.2f/%.2f%s", rank, x, y, x >= y ? "" : "(!)");
    }
    return {pass, d};
}

Outcome nmf_monotone() {
    std::mt19937_64 gen(707);
    int monotone = 0;
    double worst_rise = 0.0;
    for (int n = 0; n < 20; ++n) {
        const MatrixXd Y = uniform_input(40 + n, 30, gen);
        const FactorModel m = nmf_mu(Y, 2 + n % 5, 500, 50 + n);
        bool ok = m.objective_trace.size() == 501;
        for (std::size_t k = 1; k < m.objective_trace.size(); ++k) {
            const double rise = m.objective_trace[k] - m.objective_trace[k - 1];
            worst_rise = std::max(worst_rise, rise);
            ok = ok && rise <= 1e-12 * std::max(1.0, m.objective_trace[k - 1]);
        }
        monotone += ok;
    }
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Eigen::VectorXd w(50), h(40);
    for (auto& v : w) v = u(gen);
    for (auto& v : h) v = u(gen);
    const MatrixXd Y = w * h.transpose();
    const FactorModel one = nmf_mu(Y, 1, 500, 3);
    // nmf_mu returns unit-norm W columns with the scale carried by H
    const double rel = (Y - one.W * one.H.transpose()).norm() / Y.norm();
    return {monotone == 20 && rel < 1e-6,
            fmt("%d/20 nonincreasing over 500 iterations (largest step %.2e), rank-1 relative error %.2e", monotone,
                worst_rise, rel)};
}

Outcome stft_round_trip() {
    std::mt19937_64 gen(808);
    std::normal_distribution<double> g(0.0, 1.0);
    const StftConfig cfg;  // 128 / 100 / 512
    double worst = 0.0;
    for (int n = 0; n < 20; ++n) {
        std::vector<double> x(4000 + 137 * n);
        for (auto& v : x) v = g(gen);
        const Signal s(x, 25000.0);
        BandFilter id;
        id.freq_axis = frequency_axis(cfg, 25000.0);
        id.response.assign(id.freq_axis.size(), 1.0);
        const Signal y = apply_band_filter(s, id, cfg);
        double num = 0.0, den = 0.0;
        for (std::size_t i = cfg.window_length; i + cfg.window_length < x.size(); ++i) {
            num += (y[i] - x[i]) * (y[i] - x[i]);
            den += x[i] * x[i];
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return {worst < 1e-8, fmt("worst interior relative error over 20 signals %.2e", worst)};
}

Outcome diagnostics_oracles() {
    std::mt19937_64 gen(909);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(1000000);
    for (auto& v : x) v = g(gen);
    const double k = kurtosis(Signal(x, 1.0));
    const bool k_ok = std::abs(k - 3.0) <= 0.05;

    // 1 kHz carrier, 37 Hz modulation
    const double fs = 8000.0, fm = 37.0;
    std::vector<double> am(16000);
    for (std::size_t i = 0; i < am.size(); ++i) {
        const double t = static_cast<double>(i) / fs;
        am[i] = (1.0 + 0.5 * std::cos(2 * std::numbers::pi * fm * t)) * std::cos(2 * std::numbers::pi * 1000.0 * t);
    }
    const EnvelopeSpectrum env = envelope_spectrum(Signal(am, fs), 200.0);
    std::size_t peak = 1;
    for (std::size_t i = 1; i < env.amplitudes.size(); ++i)
        if (env.amplitudes[i] > env.amplitudes[peak]) peak = i;
    const double df = env.freq_axis[1] - env.freq_axis[0];
    const bool env_ok = std::abs(env.freq_axis[peak] - fm) <= df;

    EnvelopeSpectrum comb;
    for (int i = 0; i < 2000; ++i) {
        comb.freq_axis.push_back(0.25 * i);
        comb.amplitudes.push_back(i > 0 && i % 80 == 0 ? 1.0 + i * 1e-3 : 0.0);  // harmonics of 20 Hz
    }
    const double comb_v = envsi(comb, 20.0, 10, 2);
    const bool comb_ok = comb_v == 1.0;

    Spectrogram sp;
    const int bins = 64, frames = 10000;
    sp.frames.resize(bins, frames);
    for (int t = 0; t < frames; ++t)
        for (int b = 0; b < bins; ++b) sp.frames(b, t) = {g(gen), g(gen)};
    sp.power = sp.frames.cwiseAbs2();
    sp.sample_rate = 25000.0;
    for (int b = 0; b < bins; ++b) sp.freq_axis.push_back(b * 100.0);
    const auto skv = spectral_kurtosis(sp);
    double sk_worst = 0.0;
    for (double v : skv) sk_worst = std::max(sk_worst, std::abs(v));
    const bool sk_ok = sk_worst <= 0.1;

    return {k_ok && env_ok && comb_ok && sk_ok,
            fmt("kurtosis %.4f, envelope peak %.2f Hz (bin %.2f Hz), comb ENVSI %.17g, max |SK| %.4f", k,
                env.freq_axis[peak], df, comb_v, sk_worst)};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension();
        if (ext != ".csv" && ext != ".json") continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
    }
    return files;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SSONMF_CLI_PATH + "\" " + args + " -q";
    return std::system(cmd.c_str());
}

Outcome determinism() {
    const fs::path dir = scratch("determinism");
    const std::string common = " --preset nongauss_5_0.5 --seed 11 --ranks 6..8 --trials 3 --criterion envsi";
    std::vector<std::string> runs = {
        "sweep" + common + " --methods ss_onmf,sk,nmf_mu --jobs 1 --out \"" + (dir / "a").string() + "\"",
        "sweep" + common + " --methods ss_onmf,sk,nmf_mu --jobs 3 --out \"" + (dir / "b").string() + "\"",
        "sweep" + common + " --methods ss_onmf,sk,nmf_mu --jobs 2 --out \"" + (dir / "c").string() + "\"",
        "analyze --preset gauss_2.0 --seed 5 --rank 9 --out \"" + (dir / "d").string() + "\"",
        "analyze --preset gauss_2.0 --seed 5 --rank 9 --out \"" + (dir / "e").string() + "\"",
        "simulate --preset nongauss_15_1.1 --seed 3 --out \"" + (dir / "f").string() + "\"",
        "simulate --preset nongauss_15_1.1 --seed 3 --out \"" + (dir / "g").string() + "\"",
    };
    for (const auto& r : runs)
        if (run_cli(r) != 0) return {false, "command failed: ssonmf " + r};
    int compared = 0;
    std::string diff;
    auto same = [&](const char* x, const char* y) {
        const auto a = read_tree(dir / x), b = read_tree(dir / y);
        if (a.size() != b.size() && diff.empty()) diff = fmt("%s and %s list different files", x, y);
        for (const auto& [name, body] : a) {
            const auto it = b.find(name);
            if ((it == b.end() || it->second != body) && diff.empty()) diff = std::string(y) + "/" + name + " differs";
            ++compared;
        }
    };
    same("a", "b");
    same("a", "c");
    same("d", "e");
    same("f", "g");
    return {diff.empty() && compared > 20,
            fmt("%d exported CSV/JSON files compared across --jobs 1/2/3 and repeated runs", compared) +
                (diff.empty() ? "" : "; " + diff)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"orthogonality invariant and gates, 100 random 100x60 inputs", orthogonality},
        {"update_w equals exhaustive search, 200 instances", update_w_brute_force},
        {"band recovery, Gaussian sigma 0.5",
         [] { return recovery("gauss_0.5", 200.0, 0.9, true, Criterion::kurtosis); }},
        {"band recovery, Gaussian sigma 2.0",
         [] { return recovery("gauss_2.0", 400.0, 0.6, false, Criterion::kurtosis); }},
        {"non-Gaussian separation, impulses at 6 kHz", nongaussian_separation},
        {"robustness ordering against ONMFS, ranks 10-15", robustness_ordering},
        {"NMF-MU monotonicity and rank-1 recovery", nmf_monotone},
        {"STFT identity-mask round trip", stft_round_trip},
        {"diagnostics oracles", diagnostics_oracles},
        {"determinism across repeats and --jobs", determinism},
    };
    const double limits[] = {60, 10, 300, 300, 300, 1200, 60, 60, 60, 600};

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 2;
        }
        selected.push_back(n);
    }
    if (selected.empty())
        for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.push_back(n);

    int failed = 0;
    for (int n : selected) {
        const auto& [name, fn] = criteria[n - 1];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < limits[n - 1];
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("criterion %2d %s: %s (%.1f s, limit %.0f s)%s\n  %s\n", n, pass ? "PASS" : "FAIL", name.c_str(),
                    secs, limits[n - 1], in_time ? "" : " too slow", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
