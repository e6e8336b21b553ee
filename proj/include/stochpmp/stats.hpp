#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace stochpmp {

/// Sample mean with its Monte Carlo standard error.
struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

/// Mean and standard error of i.i.d. samples. Summation runs in index order,
/// so the result is reproducible bit for bit. A single sample has SE 0.
inline MeanEstimate estimate_mean(std::span<const double> values) {
    MeanEstimate out;
    out.samples = values.size();
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) {
        return out;
    }
    double ss = 0.0;
    for (double v : values) {
        const double d = v - out.mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(values.size() - 1);
    out.std_error = std::sqrt(var / static_cast<double>(values.size()));
    return out;
}

}  // namespace stochpmp
