#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

// Minimal dense helpers; everything in this project is small and dense,
// so flat row-major buffers are all we need.

namespace blirp {

using Vec = std::vector<double>;

// Row-major rows x cols matrix.
struct Mat {
    std::size_t rows = 0, cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y = M x
inline void matvec(const Mat& m, std::span<const double> x, std::span<double> y) {
    assert(x.size() == m.cols && y.size() == m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) y[i] = dot(m.row(i), x);
}

} // namespace blirp
