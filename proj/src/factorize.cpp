#include "ssonmf/factorize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ssonmf/error.hpp"
#include "ssonmf/random.hpp"

namespace ssonmf {

namespace {

void require_finite(const Eigen::MatrixXd& Y, const char* what) {
    if (!Y.allFinite()) throw Error(std::string(what) + " contains non-finite entries");
}

void require_nonnegative(const Eigen::MatrixXd& Y) {
    require_finite(Y, "input matrix");
    if (Y.size() == 0) throw Error("input matrix is empty");
    if ((Y.array() < 0.0).any()) throw Error("input matrix must be non-negative");
}

// Row-wise argmax (lowest column on ties) and the derived candidate statistics.
struct RowAssignment {
    std::vector<int> column;
    std::vector<double> value;
    std::vector<double> col_norm2;
    std::vector<int> support_sizes;
    double psi = 0.0;

    void assign(const Eigen::MatrixXd& Q) {
        const auto rows = static_cast<std::size_t>(Q.rows());
        const auto cols = static_cast<std::size_t>(Q.cols());
        column.resize(rows);
        value.resize(rows);
        col_norm2.assign(cols, 0.0);
        support_sizes.assign(cols, 0);
        psi = 0.0;
        for (Eigen::Index i = 0; i < Q.rows(); ++i) {
            Eigen::Index best = 0;
            double best_v = Q(i, 0);
            for (Eigen::Index r = 1; r < Q.cols(); ++r) {
                if (Q(i, r) > best_v) {
                    best_v = Q(i, r);
                    best = r;
                }
            }
            const auto ii = static_cast<std::size_t>(i);
            column[ii] = static_cast<int>(best);
            value[ii] = best_v;
            if (best_v > 0.0) {
                const double v2 = best_v * best_v;
                psi += v2;
                col_norm2[static_cast<std::size_t>(best)] += v2;
                ++support_sizes[static_cast<std::size_t>(best)];
            }
        }
    }

    Eigen::MatrixXd build(Eigen::Index rows, Eigen::Index cols) const {
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(rows, cols);
        std::vector<double> inv(col_norm2.size(), 0.0);
        for (std::size_t r = 0; r < col_norm2.size(); ++r)
            if (col_norm2[r] > 0.0) inv[r] = 1.0 / std::sqrt(col_norm2[r]);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            if (value[ii] > 0.0) {
                const auto r = static_cast<std::size_t>(column[ii]);
                W(i, column[ii]) = value[ii] * inv[r];
            }
        }
        return W;
    }
};

void normalize_columns(Eigen::MatrixXd& C) {
    for (Eigen::Index r = 0; r < C.cols(); ++r) {
        const double n = C.col(r).norm();
        if (n > 0.0) C.col(r) /= n;
    }
}

Eigen::MatrixXd time_profiles(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& W) {
    Eigen::MatrixXd H = Y.transpose() * W;
    return H.cwiseMax(0.0);
}

}  // namespace

// ---------------------------------------------------------------------------

TruncatedSvd TruncatedSvd::leading(int j) const {
    if (j < 1 || j > sigma.size()) throw Error("requested more singular triplets than available");
    return {U.leftCols(j), sigma.head(j), V.leftCols(j)};
}

Eigen::MatrixXd TruncatedSvd::scaled_basis() const { return U * sigma.asDiagonal(); }

TruncatedSvd truncated_svd(const Eigen::MatrixXd& Y, int J) {
    require_finite(Y, "input matrix");
    const auto limit = std::min(Y.rows(), Y.cols());
    if (J < 1 || J > limit) throw Error("truncated SVD rank out of range");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    TruncatedSvd out{svd.matrixU().leftCols(J), svd.singularValues().head(J), svd.matrixV().leftCols(J)};
    // Sign convention: the largest-magnitude entry of every left vector is positive.
    for (int j = 0; j < J; ++j) {
        Eigen::Index idx = 0;
        out.U.col(j).cwiseAbs().maxCoeff(&idx);
        if (out.U(idx, j) < 0.0) {
            out.U.col(j) *= -1.0;
            out.V.col(j) *= -1.0;
        }
    }
    return out;
}

WUpdate update_w(const Eigen::MatrixXd& Q) {
    if (Q.cols() < 1) throw Error("update_w needs at least one column");
    RowAssignment rows;
    rows.assign(Q);
    return {rows.build(Q.rows(), Q.cols()), rows.psi, rows.support_sizes};
}

WUpdate update_w_onmfs(const Eigen::MatrixXd& Q) {
    const auto R = static_cast<int>(Q.cols());
    if (R < 1) throw Error("update_w_onmfs needs at least one column");
    if (R > kMaxOnmfsRank) throw Error("rank too large for sign enumeration (max 16)");

    // For sign pattern s, row i contributes max(0, max_r s_r q_ir)^2, i.e. the
    // square of the largest |q_ir| whose sign agrees with s_r. Rows keep their
    // entries ordered by decreasing magnitude so the first agreeing entry wins.
    struct Entry {
        std::uint32_t bit;
        std::uint32_t negative;
        double square;
    };
    const auto I = static_cast<std::size_t>(Q.rows());
    std::vector<Entry> entries;
    std::vector<std::size_t> offsets(I + 1, 0);
    std::vector<std::pair<double, int>> order;
    for (std::size_t i = 0; i < I; ++i) {
        order.clear();
        for (int r = 0; r < R; ++r) {
            const double q = Q(static_cast<Eigen::Index>(i), r);
            if (q != 0.0) order.emplace_back(std::abs(q), r);
        }
        std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& [mag, r] : order) {
            const double q = Q(static_cast<Eigen::Index>(i), r);
            entries.push_back({static_cast<std::uint32_t>(r), q < 0.0 ? 1u : 0u, mag * mag});
        }
        offsets[i + 1] = entries.size();
    }

    const std::uint32_t patterns = 1u << R;
    double best = -1.0;
    std::uint32_t best_mask = 0;
    for (std::uint32_t mask = 0; mask < patterns; ++mask) {
        double total = 0.0;
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) {
                const Entry& en = entries[e];
                if (((mask >> en.bit) & 1u) == en.negative) {
                    total += en.square;
                    break;
                }
            }
        }
        if (total > best) {
            best = total;
            best_mask = mask;
        }
    }

    Eigen::MatrixXd signed_q = Q;
    for (int r = 0; r < R; ++r)
        if ((best_mask >> r) & 1u) signed_q.col(r) *= -1.0;
    return update_w(signed_q);
}

double beta_schedule(int k, double floor) {
    if (!(floor > 0.0 && floor < 1.0)) throw Error("beta floor must lie in (0, 1)");
    if (k < 0) throw Error("iteration index must be non-negative");
    return std::max(floor, 1.0 - std::tanh(static_cast<double>(k)));
}

int FactorModel::nonempty_columns() const {
    int count = 0;
    for (Eigen::Index r = 0; r < W.cols(); ++r)
        if ((W.col(r).array() != 0.0).any()) ++count;
    return count;
}

void SsOnmfConfig::validate(int bins, int frames) const {
    if (rank < 2) throw Error("SS-ONMF rank must be at least 2");
    const int J = effective_tsvd_rank();
    if (J < rank) throw Error("TSVD rank must be at least the factorization rank");
    if (J > std::min(bins, frames)) throw Error("TSVD rank exceeds matrix dimensions");
    if (max_iters < 0) throw Error("iteration count must be non-negative");
    if (!(min_bandwidth > 0.0 && min_bandwidth < 1.0)) throw Error("minimum bandwidth factor must lie in (0, 1)");
    if (!(beta_floor > 0.0 && beta_floor < 1.0)) throw Error("beta floor must lie in (0, 1)");
}

FactorModel ss_onmf(const Eigen::MatrixXd& Y, const SsOnmfConfig& config) {
    require_nonnegative(Y);
    config.validate(static_cast<int>(Y.rows()), static_cast<int>(Y.cols()));
    return ss_onmf(Y, truncated_svd(Y, config.effective_tsvd_rank()), config);
}

FactorModel ss_onmf(const Eigen::MatrixXd& Y, const TruncatedSvd& svd, const SsOnmfConfig& config) {
    require_nonnegative(Y);
    if (!(Y.array() > 0.0).any()) throw Error("degenerate input: all-zero matrix");
    config.validate(static_cast<int>(Y.rows()), static_cast<int>(Y.cols()));
    const int J = config.effective_tsvd_rank();
    const int R = config.rank;
    if (svd.U.rows() != Y.rows()) throw Error("decomposition does not match the input matrix");
    // Candidates are sampled in the orthonormal basis U rather than U * Sigma.
    // With the singular values applied, the leading all-positive component
    // dominates every row of Q, so a few columns win all rows and the
    // bandwidth gate rejects every draw from C = 0 once R reaches about 9.
    const Eigen::MatrixXd Z = svd.leading(J).U;
    const double min_support = config.min_bandwidth * static_cast<double>(Y.rows());

    Rng rng(config.seed);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(J, R);
    Eigen::MatrixXd candidate(J, R);
    Eigen::MatrixXd Q(Y.rows(), R);
    RowAssignment rows;

    FactorModel model;
    model.method = "ss_onmf";
    model.W = Eigen::MatrixXd::Zero(Y.rows(), R);
    model.rank = R;
    model.tsvd_rank = J;
    model.seed = config.seed;
    model.iterations = config.max_iters;
    double psi = 0.0;

    for (int k = 1; k <= config.max_iters; ++k) {
        const double beta = beta_schedule(k, config.beta_floor);
        for (Eigen::Index r = 0; r < R; ++r)
            for (Eigen::Index j = 0; j < J; ++j) candidate(j, r) = C(j, r) + beta * laplace(rng);
        normalize_columns(candidate);
        Q.noalias() = Z * candidate;
        rows.assign(Q);

        const auto& l = rows.support_sizes;
        const int nonempty = static_cast<int>(std::count_if(l.begin(), l.end(), [](int v) { return v > 0; }));
        const auto [lo, hi] = std::minmax_element(l.begin(), l.end());
        double mean = 0.0;
        for (int v : l) mean += v;
        mean /= static_cast<double>(l.size());
        const bool wide =
            std::all_of(l.begin(), l.end(), [&](int v) { return static_cast<double>(v) > min_support; });

        const bool improves = rows.psi > psi;
        const bool full = nonempty > 1;
        const bool uneven = static_cast<double>(*hi - *lo) > mean;
        model.gate_failures.objective += !improves;
        model.gate_failures.rank += !full;
        model.gate_failures.min_bandwidth += !wide;
        model.gate_failures.non_uniformity += !uneven;

        if (improves && full && wide && uneven) {
            psi = rows.psi;
            C = candidate;
            model.W = rows.build(Y.rows(), R);
            ++model.accepted_steps;
            model.objective_trace.push_back(psi);
        }
    }

    if (model.accepted_steps == 0) {
        const auto& g = model.gate_failures;
        throw NoCandidateError("no accepted candidate after " + std::to_string(config.max_iters) +
                               " iterations (gate failures: objective=" + std::to_string(g.objective) +
                               ", rank=" + std::to_string(g.rank) + ", min_bandwidth=" +
                               std::to_string(g.min_bandwidth) + ", non_uniformity=" +
                               std::to_string(g.non_uniformity) + ")");
    }
    model.objective = psi;
    model.directions = C;
    model.H = time_profiles(Y, model.W);
    return model;
}

FactorModel onmfs(const Eigen::MatrixXd& Y, int J, int R, int K, std::uint64_t seed) {
    require_nonnegative(Y);
    if (J < 1 || J > std::min(Y.rows(), Y.cols())) throw Error("TSVD rank out of range");
    return onmfs(Y, truncated_svd(Y, J), J, R, K, seed);
}

FactorModel onmfs(const Eigen::MatrixXd& Y, const TruncatedSvd& svd, int J, int R, int K, std::uint64_t seed) {
    require_nonnegative(Y);
    if (!(Y.array() > 0.0).any()) throw Error("degenerate input: all-zero matrix");
    if (R < 1 || R > kMaxOnmfsRank) throw Error("ONMFS rank must lie in [1, 16]");
    if (J < 1 || J > svd.sigma.size()) throw Error("TSVD rank out of range");
    if (K <= 0) throw NoCandidateError("no accepted candidate");
    const Eigen::MatrixXd Z = svd.leading(J).scaled_basis();

    Rng rng(seed);
    Eigen::MatrixXd C(J, R);
    FactorModel model;
    model.method = "onmfs";
    model.rank = R;
    model.tsvd_rank = J;
    model.seed = seed;
    model.iterations = K;
    double best = -1.0;
    for (int k = 0; k < K; ++k) {
        for (Eigen::Index r = 0; r < R; ++r)
            for (Eigen::Index j = 0; j < J; ++j) C(j, r) = gaussian(rng);
        normalize_columns(C);
        WUpdate cand = update_w_onmfs(Z * C);
        const double score = (Z.transpose() * cand.W).squaredNorm();
        if (score > best) {
            best = score;
            model.W = std::move(cand.W);
            model.directions = C;
            ++model.accepted_steps;
            model.objective_trace.push_back(score);
        }
    }
    model.objective = best;
    model.H = time_profiles(Y, model.W);
    return model;
}

FactorModel nmf_mu(const Eigen::MatrixXd& Y, int R, int iters, std::uint64_t seed) {
    require_nonnegative(Y);
    if (R < 1 || R > std::min(Y.rows(), Y.cols())) throw Error("NMF rank out of range");
    if (iters < 0) throw Error("iteration count must be non-negative");

    const double scale = std::sqrt(std::max(Y.mean(), std::numeric_limits<double>::min()) / R);
    Rng rng(seed);
    Eigen::MatrixXd W(Y.rows(), R);
    Eigen::MatrixXd H(Y.cols(), R);
    for (Eigen::Index r = 0; r < R; ++r)
        for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, r) = scale * (0.01 + uniform01(rng));
    for (Eigen::Index r = 0; r < R; ++r)
        for (Eigen::Index t = 0; t < H.rows(); ++t) H(t, r) = scale * (0.01 + uniform01(rng));

    auto loss = [&Y](const Eigen::MatrixXd& w, const Eigen::MatrixXd& h) {
        const Eigen::MatrixXd approx = w * h.transpose();
        long double acc = 0.0L;
        for (Eigen::Index t = 0; t < Y.cols(); ++t)
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                const long double d = static_cast<long double>(Y(i, t)) - approx(i, t);
                acc += d * d;
            }
        return static_cast<double>(acc);
    };

    constexpr double tiny = std::numeric_limits<double>::min();
    FactorModel model;
    model.method = "nmf_mu";
    model.rank = R;
    model.seed = seed;
    model.iterations = iters;
    model.objective_trace.reserve(static_cast<std::size_t>(iters) + 1);
    model.objective_trace.push_back(loss(W, H));
    for (int it = 0; it < iters; ++it) {
        const Eigen::MatrixXd h_num = Y.transpose() * W;
        const Eigen::MatrixXd h_den = H * (W.transpose() * W);
        H = H.cwiseProduct(h_num.cwiseQuotient((h_den.array() + tiny).matrix()));
        const Eigen::MatrixXd w_num = Y * H;
        const Eigen::MatrixXd w_den = W * (H.transpose() * H);
        W = W.cwiseProduct(w_num.cwiseQuotient((w_den.array() + tiny).matrix()));
        model.objective_trace.push_back(loss(W, H));
    }
    for (Eigen::Index r = 0; r < R; ++r) {
        const double n = W.col(r).norm();
        if (n > 0.0) {
            W.col(r) /= n;
            H.col(r) *= n;
        }
    }
    model.W = std::move(W);
    model.H = std::move(H);
    model.objective = model.objective_trace.back();
    model.accepted_steps = iters;
    return model;
}

double orthogonality_error(const Eigen::MatrixXd& W) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < W.cols(); ++r)
        if ((W.col(r).array() != 0.0).any()) keep.push_back(r);
    Eigen::MatrixXd sub(W.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = W.col(keep[c]);
    const Eigen::MatrixXd gram = sub.transpose() * sub;
    return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).norm();
}

namespace {

void write_matrix_csv(const Eigen::MatrixXd& M, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[32];
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            if (j) out << ',';
            std::snprintf(buf, sizeof buf, "%.17g", M(i, j));
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

void export_factor_model(const FactorModel& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(model.W, dir / "W.csv");
    write_matrix_csv(model.H, dir / "H.csv");
    nlohmann::ordered_json j;
    j["method"] = model.method;
    j["objective"] = model.objective;
    j["rank"] = model.rank;
    j["tsvd_rank"] = model.tsvd_rank;
    j["seed"] = model.seed;
    j["iterations"] = model.iterations;
    j["accepted_steps"] = model.accepted_steps;
    j["gate_failures"] = {{"objective", model.gate_failures.objective},
                          {"rank", model.gate_failures.rank},
                          {"min_bandwidth", model.gate_failures.min_bandwidth},
                          {"non_uniformity", model.gate_failures.non_uniformity}};
    std::ofstream out(dir / "model.json");
    if (!out) throw Error("cannot write " + (dir / "model.json").string());
    out << j.dump(2) << '\n';
}

}  // namespace ssonmf
