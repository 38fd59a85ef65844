#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mlpsd/dataset.hpp"

namespace testing_util {

inline mlpsd::AnnotationSet random_set(int n, int m, int d, double density, unsigned seed) {
    std::mt19937 rng(seed);
    std::bernoulli_distribution fire(density);
    std::normal_distribution<double> normal;
    std::vector<mlpsd::Sample> samples;
    for (int i = 0; i < n; ++i) {
        mlpsd::Sample s;
        s.id = "r" + std::to_string(i);
        s.features.resize(d);
        for (int k = 0; k < d; ++k) s.features(k) = normal(rng);
        s.labels.resize(m);
        for (int c = 0; c < m; ++c) s.labels(c) = fire(rng) ? 1 : 0;
        samples.push_back(std::move(s));
    }
    std::vector<std::string> names;
    for (int c = 0; c < m; ++c) names.push_back("c" + std::to_string(c));
    return mlpsd::AnnotationSet(names, samples, d);
}

/// Builds a set from label rows; features are the label vector (d = m).
inline mlpsd::AnnotationSet from_labels(const std::vector<std::vector<int>>& rows) {
    const int m = static_cast<int>(rows.front().size());
    std::vector<mlpsd::Sample> samples;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        mlpsd::Sample s;
        s.id = "s" + std::to_string(i);
        s.labels.resize(m);
        s.features.resize(m);
        for (int c = 0; c < m; ++c) {
            s.labels(c) = static_cast<std::uint8_t>(rows[i][c]);
            s.features(c) = rows[i][c];
        }
        samples.push_back(std::move(s));
    }
    std::vector<std::string> names;
    for (int c = 0; c < m; ++c) names.push_back("c" + std::to_string(c));
    return mlpsd::AnnotationSet(names, samples, m);
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mlpsd_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing_util
