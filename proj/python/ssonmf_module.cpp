#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ssonmf/config.hpp"
#include "ssonmf/diagnostics.hpp"
#include "ssonmf/error.hpp"
#include "ssonmf/factorize.hpp"
#include "ssonmf/harness.hpp"
#include "ssonmf/tfr.hpp"

namespace py = pybind11;
using namespace ssonmf;

namespace {

// Configs cross the boundary as JSON text; the Python wrapper handles dicts.
ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig base;
    if (doc.is_object() && doc.contains("preset")) {
        base = preset(doc["preset"].get<std::string>());
        doc.erase("preset");
    }
    return config_from_json(doc, base);
}

StftConfig stft_config(int window_length, int overlap, int nfft) {
    StftConfig c;
    c.window_length = window_length;
    c.overlap = overlap;
    c.nfft = nfft;
    c.validate();
    return c;
}

Signal to_signal(const std::vector<double>& x, double fs) { return Signal(x, fs); }

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::dict model_dict(const FactorModel& m) {
    py::dict d;
    d["method"] = m.method;
    d["W"] = m.W;
    d["H"] = m.H;
    d["objective"] = m.objective;
    d["rank"] = m.rank;
    d["seed"] = m.seed;
    d["accepted_steps"] = m.accepted_steps;
    d["objective_trace"] = to_array(m.objective_trace);
    return d;
}

py::dict report_dict(const DiagnosticReport& r) {
    py::dict d;
    d["kurtosis"] = r.kurtosis;
    d["envsi"] = r.envsi;
    d["raw_kurtosis"] = r.raw_kurtosis;
    d["raw_envsi"] = r.raw_envsi;
    d["criterion"] = to_string(r.criterion);
    d["selected_filter"] = r.selected_filter_index;
    d["filter"] = to_array(r.filter.response);
    d["freq_axis"] = to_array(r.filter.freq_axis);
    d["centroid_hz"] = band_centroid(r.filter);
    d["envelope_freq"] = to_array(r.envelope.freq_axis);
    d["envelope"] = to_array(r.envelope.amplitudes);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Band selection for local damage detection: native core";

    // translators run newest first, so the derived type goes last
    py::register_exception<Error>(m, "SsonmfError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("preset_names", &preset_names);
    m.def("preset_json", [](const std::string& name) { return config_to_json(preset(name)).dump(); });
    m.def("normalize_config", [](const std::string& text) { return config_to_json(parse_config(text)).dump(); });
    m.def("config_schema", [] { return config_schema().dump(); });

    m.def(
        "simulate",
        [](const std::string& text) {
            const SimulatedSignal s = simulate(parse_config(text));
            py::dict d;
            d["mixed"] = to_array(s.mixed.samples());
            d["soi"] = to_array(s.soi.samples());
            d["gaussian"] = to_array(s.gaussian.samples());
            d["impulsive"] = to_array(s.impulsive.samples());
            d["sample_rate"] = s.mixed.sample_rate();
            return d;
        },
        py::arg("config"));

    m.def(
        "stft",
        [](const std::vector<double>& x, double fs, int wl, int ov, int nfft) {
            const Spectrogram s = stft(to_signal(x, fs), stft_config(wl, ov, nfft));
            return py::make_tuple(s.power, to_array(s.freq_axis), to_array(s.time_axis));
        },
        py::arg("x"), py::arg("sample_rate"), py::arg("window_length") = 128, py::arg("overlap") = 100,
        py::arg("nfft") = 512);

    m.def(
        "apply_band_filter",
        [](const std::vector<double>& x, double fs, const std::vector<double>& response, int wl, int ov, int nfft) {
            const StftConfig c = stft_config(wl, ov, nfft);
            BandFilter f;
            f.freq_axis = frequency_axis(c, fs);
            f.response = response;
            return to_array(apply_band_filter(to_signal(x, fs), f, c).samples());
        },
        py::arg("x"), py::arg("sample_rate"), py::arg("response"), py::arg("window_length") = 128,
        py::arg("overlap") = 100, py::arg("nfft") = 512);

    m.def(
        "update_w",
        [](const Eigen::MatrixXd& Q) {
            const WUpdate u = update_w(Q);
            return py::make_tuple(u.W, u.psi, u.support_sizes);
        },
        py::arg("Q"));

    m.def(
        "ss_onmf",
        [](const Eigen::MatrixXd& Y, int rank, int tsvd_rank, int max_iters, double min_bandwidth, double beta_floor,
           std::uint64_t seed) {
            SsOnmfConfig c;
            c.rank = rank;
            c.tsvd_rank = tsvd_rank > 0 ? tsvd_rank : rank;
            c.max_iters = max_iters;
            c.min_bandwidth = min_bandwidth;
            c.beta_floor = beta_floor;
            c.seed = seed;
            FactorModel fm;
            {
                py::gil_scoped_release release;
                fm = ss_onmf(Y, c);
            }
            return model_dict(fm);
        },
        py::arg("Y"), py::arg("rank"), py::arg("tsvd_rank") = 0, py::arg("max_iters") = 20000,
        py::arg("min_bandwidth") = 0.01, py::arg("beta_floor") = 1e-3, py::arg("seed") = 0);

    m.def(
        "onmfs",
        [](const Eigen::MatrixXd& Y, int rank, int tsvd_rank, int iters, std::uint64_t seed) {
            return model_dict(onmfs(Y, tsvd_rank > 0 ? tsvd_rank : rank, rank, iters, seed));
        },
        py::arg("Y"), py::arg("rank"), py::arg("tsvd_rank") = 0, py::arg("iters") = 300, py::arg("seed") = 0);

    m.def(
        "nmf_mu",
        [](const Eigen::MatrixXd& Y, int rank, int iters, std::uint64_t seed) {
            return model_dict(nmf_mu(Y, rank, iters, seed));
        },
        py::arg("Y"), py::arg("rank"), py::arg("iters") = 200, py::arg("seed") = 0);

    m.def("orthogonality_error", &orthogonality_error, py::arg("W"));

    m.def(
        "kurtosis", [](const std::vector<double>& x) { return kurtosis(std::span<const double>(x)); }, py::arg("x"));
    m.def(
        "envelope_spectrum",
        [](const std::vector<double>& x, double fs, double f_max) {
            const EnvelopeSpectrum e = envelope_spectrum(to_signal(x, fs), f_max);
            return py::make_tuple(to_array(e.freq_axis), to_array(e.amplitudes));
        },
        py::arg("x"), py::arg("sample_rate"), py::arg("f_max"));
    m.def(
        "envsi",
        [](const std::vector<double>& freq, const std::vector<double>& amp, double fault_freq, int harmonics,
           int tol_bins) {
            EnvelopeSpectrum e;
            e.freq_axis = freq;
            e.amplitudes = amp;
            return envsi(e, fault_freq, harmonics, tol_bins);
        },
        py::arg("freq"), py::arg("amplitudes"), py::arg("fault_freq"), py::arg("harmonics") = 10,
        py::arg("tol_bins") = 2);
    m.def(
        "spectral_kurtosis",
        [](const std::vector<double>& x, double fs, int wl, int ov, int nfft) {
            return to_array(spectral_kurtosis(stft(to_signal(x, fs), stft_config(wl, ov, nfft))));
        },
        py::arg("x"), py::arg("sample_rate"), py::arg("window_length") = 128, py::arg("overlap") = 100,
        py::arg("nfft") = 512);

    m.def(
        "run_trial",
        [](const std::string& text, int rank, std::uint64_t seed) {
            const ExperimentConfig c = parse_config(text);
            TrialOutcome out;
            {
                py::gil_scoped_release release;
                out = run_trial(c, rank, seed);
            }
            py::dict d = report_dict(out.report);
            d["model"] = model_dict(out.model);
            return d;
        },
        py::arg("config"), py::arg("rank"), py::arg("seed"));

    m.def("trial_seed", &trial_seed, py::arg("base_seed"), py::arg("rank"), py::arg("trial"));

    m.def(
        "rank_sweep",
        [](const std::string& text, int jobs, const std::string& out_dir) {
            const ExperimentConfig c = parse_config(text);
            McResult r;
            {
                py::gil_scoped_release release;
                r = rank_sweep(c, jobs);
                if (!out_dir.empty()) export_report(r, out_dir);
            }
            py::list trials;
            for (const auto& t : r.trials) {
                py::dict row;
                row["rank"] = t.rank;
                row["trial"] = t.trial;
                row["seed"] = t.seed;
                row["ok"] = t.ok;
                row["value"] = t.ok ? py::cast(t.value) : py::none();
                row["centroid_hz"] = t.ok ? py::cast(t.centroid) : py::none();
                row["failure"] = t.failure;
                trials.append(row);
            }
            py::dict medians;
            for (const auto& s : r.ranks) medians[py::int_(s.rank)] = s.succeeded ? py::cast(s.stats.median) : py::none();
            py::dict d;
            d["trials"] = trials;
            d["medians"] = medians;
            d["best_rank"] = r.best_rank;
            d["raw_kurtosis"] = r.raw_kurtosis;
            d["raw_envsi"] = r.raw_envsi;
            return d;
        },
        py::arg("config"), py::arg("jobs") = 1, py::arg("out_dir") = "");
}
