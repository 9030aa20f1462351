#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "blirp/linalg.hpp"
#include "blirp/logspace.hpp"

using namespace blirp;

TEST_CASE("log_sum_exp basics") {
    Vec v = {0.0, 0.0};
    CHECK(log_sum_exp(v) == Catch::Approx(std::log(2.0)).epsilon(1e-14));
    Vec single = {3.25};
    CHECK(log_sum_exp(single) == 3.25);
    Vec with_inf = {neg_inf, 1.0};
    CHECK(log_sum_exp(with_inf) == Catch::Approx(1.0).epsilon(1e-14));
    Vec all_inf = {neg_inf, neg_inf};
    CHECK(log_sum_exp(all_inf) == neg_inf);
}

TEST_CASE("log_sum_exp survives extreme magnitudes") {
    // exponents around +-700 would overflow exp() without the max shift
    Vec big = {700.0, 699.0, 698.0};
    const double r = log_sum_exp(big);
    CHECK(std::isfinite(r));
    CHECK(r == Catch::Approx(700.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-2.0))).epsilon(1e-14));
    Vec small = {-700.0, -700.0};
    CHECK(log_sum_exp(small) == Catch::Approx(-700.0 + std::log(2.0)).epsilon(1e-14));
    Vec huge = {-1e6, -1e6 + 1};
    CHECK(std::isfinite(log_sum_exp(huge)));
}

TEST_CASE("log_mean_exp of one sample is the sample") {
    Vec one = {-2.5};
    CHECK(log_mean_exp(one) == -2.5);
}

TEST_CASE("softmax weights are normalized and uniform on ties") {
    Vec v = {5.0, 5.0, 5.0};
    const Vec w = softmax_from_logs(v);
    for (double x : w) CHECK(x == Catch::Approx(1.0 / 3.0).epsilon(1e-15));

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-800.0, 800.0);
    for (int rep = 0; rep < 50; ++rep) {
        Vec z(17);
        for (double& x : z) x = u(rng);
        const Vec wz = softmax_from_logs(z);
        double sum = 0.0;
        for (double x : wz) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("effective sample size") {
    Vec uniform = {0.25, 0.25, 0.25, 0.25};
    CHECK(effective_sample_size(uniform) == Catch::Approx(4.0).epsilon(1e-12));
    Vec point = {1.0, 0.0, 0.0};
    CHECK(effective_sample_size(point) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mean_and_se") {
    Vec v = {1.0, 2.0, 3.0, 4.0};
    const auto ms = mean_and_se(v);
    CHECK(ms.value == Catch::Approx(2.5).epsilon(1e-15));
    // sample sd = sqrt(5/3), se = sd / 2
    CHECK(ms.se == Catch::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-12));
    Vec one = {7.0};
    CHECK(mean_and_se(one).se == 0.0);
}
