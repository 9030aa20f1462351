#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

// Log-domain reductions. Every partition-style sum in this library goes
// through these helpers so that exp() never overflows for exponents up to
// ~1e6 in magnitude.

namespace blirp {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Neumaier-compensated sum; deterministic for a fixed operand order.
inline double stable_sum(std::span<const double> v) {
    double sum = 0.0, comp = 0.0;
    for (double x : v) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

// log(sum_i exp(v_i)), max-shifted. Empty input or all -inf yields -inf.
inline double log_sum_exp(std::span<const double> v) {
    double mx = neg_inf;
    for (double x : v) mx = std::max(mx, x);
    if (mx == neg_inf) return neg_inf;
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

// log((1/N) sum_i exp(v_i)); the plain Monte Carlo mean in log domain.
inline double log_mean_exp(std::span<const double> v) {
    assert(!v.empty());
    return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

// Self-normalized weights w_i = exp(v_i) / sum_j exp(v_j), max-shifted.
// All-equal inputs give exactly uniform weights.
inline void softmax_from_logs(std::span<const double> v, std::span<double> w) {
    assert(v.size() == w.size() && !v.empty());
    double mx = neg_inf;
    for (double x : v) mx = std::max(mx, x);
    assert(mx != neg_inf && "softmax over empty support");
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        w[i] = std::exp(v[i] - mx);
        sum += w[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] /= sum;
}

inline std::vector<double> softmax_from_logs(std::span<const double> v) {
    std::vector<double> w(v.size());
    softmax_from_logs(v, w);
    return w;
}

// 1 / sum w_i^2 for normalized weights; N for uniform, 1 for a point mass.
inline double effective_sample_size(std::span<const double> w) {
    double s2 = 0.0;
    for (double x : w) s2 += x * x;
    return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

struct MeanAndSe {
    double value = 0.0;
    double se = 0.0;
};

// Two-pass sample mean with standard error of the mean.
inline MeanAndSe mean_and_se(std::span<const double> v) {
    assert(!v.empty());
    const auto n = static_cast<double>(v.size());
    double mean = stable_sum(v) / n;
    if (v.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

} // namespace blirp
