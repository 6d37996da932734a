#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace nmde {

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7, the R default). `values` need not be sorted.
inline double empirical_quantile(std::span<const double> values, double prob) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace nmde
