#pragma once

// Reference computations used only by tests. None of these share code with
// the library paths they check.

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <functional>
#include <vector>

namespace jnd::oracle {

using Float50 = boost::multiprecision::cpp_bin_float_50;

/// Upper normal tail evaluated in 50-digit arithmetic.
inline double upper_tail(double x) {
    const Float50 arg = Float50(x) / boost::multiprecision::sqrt(Float50(2));
    return static_cast<double>(boost::math::erfc(arg) / 2);
}

/// Composite 20-point Gauss-Legendre rule over `panels` equal panels.
inline double integrate(const std::function<double(double)>& f, double a, double b, int panels = 64) {
    const double width = (b - a) / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double lo = a + k * width;
        total += boost::math::quadrature::gauss<double, 20>::integrate(f, lo, lo + width);
    }
    return total;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Kolmogorov-Smirnov distance between a sample of integers and a CDF
/// evaluated at the integers.
inline double ks_distance_discrete(std::vector<int> sample, const std::function<double(int)>& cdf, int lo, int hi) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(hi - lo + 1), 0);
    for (int v : sample) ++counts[static_cast<std::size_t>(v - lo)];
    double worst = 0.0;
    std::size_t cumulative = 0;
    for (int k = lo; k <= hi; ++k) {
        cumulative += counts[static_cast<std::size_t>(k - lo)];
        const double empirical = static_cast<double>(cumulative) / static_cast<double>(sample.size());
        worst = std::max(worst, std::abs(empirical - cdf(k)));
    }
    return worst;
}

}  // namespace jnd::oracle
