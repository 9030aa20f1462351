#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "blirp/rng.hpp"

using namespace blirp;

TEST_CASE("gaussian_stream is a pure function of (seed, coords)") {
    const double a = gaussian_stream(42, {1, 2, 3});
    const double b = gaussian_stream(42, {1, 2, 3});
    CHECK(a == b);
    CHECK(gaussian_stream(1, {5, 5}) != gaussian_stream(2, {5, 5}));
    CHECK(gaussian_stream(1, {5, 5}) != gaussian_stream(1, {5, 6}));
    CHECK(gaussian_stream(1, {5}) != gaussian_stream(1, {5, 0}));
}

TEST_CASE("gaussian_stream moments over 1e6 draws") {
    const std::size_t n = 1'000'000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = gaussian_stream(2024, {0, i});
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sumsq / static_cast<double>(n) - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("tail sanity: no absurd values, both signs present") {
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < 10'000; ++i) {
        const double x = gaussian_stream(7, {i});
        CHECK(std::isfinite(x));
        CHECK(std::abs(x) < 10.0);
        (x > 0 ? pos : neg)++;
    }
    CHECK(pos > 4000);
    CHECK(neg > 4000);
}
