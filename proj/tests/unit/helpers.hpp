#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "ssonmf/random.hpp"

namespace testutil {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ssonmf_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Eigen::MatrixXd uniform_matrix(int rows, int cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    ssonmf::Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = lo + (hi - lo) * ssonmf::uniform01(rng);
    return m;
}

inline Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    ssonmf::Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = ssonmf::gaussian(rng);
    return m;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
