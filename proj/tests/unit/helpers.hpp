#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "smet/data.hpp"

namespace testutil {

inline std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "smet_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline std::filesystem::path write_text(const std::string& name, const std::string& text) {
    auto p = temp_path(name);
    std::ofstream(p) << text;
    return p;
}

inline smet::TimeSeriesFrame random_frame(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    smet::TimeSeriesFrame f;
    f.start = smet::parse_timestamp("2016-07-01 00:00:00");
    f.values = smet::Matrix(rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& x : f.values.data) x = n(rng);
    for (std::size_t c = 0; c < cols; ++c) f.names.push_back("c" + std::to_string(c));
    return f;
}

inline smet::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    smet::Matrix m(r, c);
    std::normal_distribution<double> n(0.0, scale);
    for (auto& x : m.data) x = n(rng);
    return m;
}

}  // namespace testutil
