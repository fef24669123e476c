#pragma once

#include "asr/error.hpp"
#include "asr/stats/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace asr::stats {

struct PairedTTestResult
{
    double t_statistic = 0.0;
    double p_value = 1.0; // two-sided
    std::size_t df = 0;
    std::size_t n = 0;
    /// mean(a - b); positive favours `a`.
    double mean_diff = 0.0;
};

inline PairedTTestResult paired_ttest(std::span<double const> a, std::span<double const> b)
{
    require(a.size() == b.size(), ErrorCode::PairingError,
            "paired samples differ in length (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    auto const n = a.size();
    require(n >= 2, ErrorCode::InsufficientData, "paired t-test needs at least two pairs");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += a[i] - b[i];
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double const d = a[i] - b[i] - mean;
        ss += d * d;
    }
    double const sd = std::sqrt(ss / static_cast<double>(n - 1));
    // differences equal up to rounding count as constant
    require(sd > 1e-13 * std::max(1.0, std::fabs(mean)), ErrorCode::ZeroVariance, "paired differences have zero variance");

    PairedTTestResult r;
    r.n = n;
    r.df = n - 1;
    r.mean_diff = mean;
    r.t_statistic = mean * std::sqrt(static_cast<double>(n)) / sd;
    r.p_value = student_t_two_sided_p(r.t_statistic, static_cast<double>(r.df));
    return r;
}

} // namespace asr::stats
