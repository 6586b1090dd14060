#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ssonmf {

struct TruncatedSvd {
    Eigen::MatrixXd U;      // I x J
    Eigen::VectorXd sigma;  // J, nonincreasing
    Eigen::MatrixXd V;      // T x J

    // Leading `j` components of an existing decomposition.
    TruncatedSvd leading(int j) const;
    // Z = U * diag(sigma), the scaled column-space basis sampled by ONMFS.
    Eigen::MatrixXd scaled_basis() const;
};

TruncatedSvd truncated_svd(const Eigen::MatrixXd& Y, int J);

struct WUpdate {
    Eigen::MatrixXd W;               // non-negative, unit-norm disjoint columns
    double psi = 0.0;                // sum of squared positive row maxima
    std::vector<int> support_sizes;  // l0 norm per column
};

// Row-argmax support assignment with the non-negativity test.
WUpdate update_w(const Eigen::MatrixXd& Q);

// Exhaustive sign-pattern search over all 2^R column signs.
WUpdate update_w_onmfs(const Eigen::MatrixXd& Q);

inline constexpr int kMaxOnmfsRank = 16;

// Perturbation scale of the sampling chain.
double beta_schedule(int k, double floor);

struct GateStats {
    long long objective = 0;       // candidate objective did not improve
    long long rank = 0;            // fewer than two nonempty columns
    long long min_bandwidth = 0;   // some column has l0 <= xi * I
    long long non_uniformity = 0;  // max(l) - min(l) <= mean(l)
};

struct FactorModel {
    std::string method;
    Eigen::MatrixXd W;           // I x R
    Eigen::MatrixXd H;           // T x R
    Eigen::MatrixXd directions;  // J x R sampling state (empty for NMF-MU)
    double objective = 0.0;
    int rank = 0;
    int tsvd_rank = 0;
    std::uint64_t seed = 0;
    int iterations = 0;
    int accepted_steps = 0;
    GateStats gate_failures;
    std::vector<double> objective_trace;  // accepted Psi values, or NMF-MU loss per iteration

    int nonempty_columns() const;
};

struct SsOnmfConfig {
    int rank = 10;             // R
    int tsvd_rank = 0;         // J; 0 means J = R
    int max_iters = 20000;     // K
    double min_bandwidth = 0.01;  // xi
    double beta_floor = 1e-3;     // lower bound of the perturbation scale
    std::uint64_t seed = 0;

    int effective_tsvd_rank() const noexcept { return tsvd_rank > 0 ? tsvd_rank : rank; }
    void validate(int bins, int frames) const;
};

FactorModel ss_onmf(const Eigen::MatrixXd& Y, const SsOnmfConfig& config);
// Variant reusing a precomputed decomposition with at least J components.
FactorModel ss_onmf(const Eigen::MatrixXd& Y, const TruncatedSvd& svd, const SsOnmfConfig& config);

FactorModel onmfs(const Eigen::MatrixXd& Y, int J, int R, int K, std::uint64_t seed);
FactorModel onmfs(const Eigen::MatrixXd& Y, const TruncatedSvd& svd, int J, int R, int K,
                  std::uint64_t seed);

// Euclidean multiplicative updates, Y ~ W H^T.
FactorModel nmf_mu(const Eigen::MatrixXd& Y, int R, int iters, std::uint64_t seed);

double orthogonality_error(const Eigen::MatrixXd& W);

// Writes W.csv, H.csv and model.json into `dir`.
void export_factor_model(const FactorModel& model, const std::filesystem::path& dir);

}  // namespace ssonmf
