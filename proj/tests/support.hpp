#pragma once

// Panel recipes shared by the unit tests and the acceptance runner.

#include "jnd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace jnd::testing {

/// 15 x 37 panel with five planted outliers in columns 3, 10, 17, 24 and 31
/// (two biased high, one biased low, two inconsistent). The others are
/// well-behaved: |b| <= 1 and v_s <= 1.
inline PanelSpec outlier_panel(std::uint64_t seed) {
    PanelSpec spec;
    spec.n_contents = 15;
    spec.n_subjects = 37;
    spec.b = {-1.0, 1.0};
    spec.v_s = {0.0, 1.0};
    spec.seed = seed;
    spec.planted = {{3, 8.0, 1.0}, {10, -8.0, 1.0}, {17, 8.0, 1.5}, {24, 0.0, 6.0}, {31, 0.5, 6.0}};
    return spec;
}

inline std::vector<std::size_t> planted_columns(const PanelSpec& spec) {
    std::vector<std::size_t> out;
    for (const auto& p : spec.planted) out.push_back(p.subject);
    return out;
}

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sum / static_cast<double>(a.size()));
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace jnd::testing
