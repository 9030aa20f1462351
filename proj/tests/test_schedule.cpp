#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <random>

#include "blirp/schedule.hpp"

using namespace blirp;

namespace {

LiftingSchedule basic_r1() {
    LiftingSchedule c;
    c.r = 1;
    c.m_schedule = {1.0, 0.5, 0.0};
    c.p_schedule = {1.0, 0.5, 0.0};
    c.q_schedule = {1.0, 0.5, 0.0};
    c.beta = 1.0;
    c.s = -1.0;
    c.group_exponent = 1.0;
    return c;
}

// random valid schedule at a given r
LiftingSchedule random_schedule(int r, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LiftingSchedule c;
    c.r = r;
    auto chain = [&](bool m_style) {
        std::vector<double> v(static_cast<std::size_t>(r) + 2);
        v.front() = m_style ? 1.0 : 0.5 + 0.5 * u(rng);
        for (int k = 1; k <= r; ++k)
            v[static_cast<std::size_t>(k)] =
                v[static_cast<std::size_t>(k) - 1] * (m_style ? (0.3 + 0.7 * u(rng)) : u(rng));
        v.back() = 0.0;
        return v;
    };
    c.m_schedule = chain(true);
    c.p_schedule = chain(false);
    c.q_schedule = chain(false);
    c.beta = 0.5 + 1.5 * u(rng);
    c.s = u(rng) < 0.5 ? -1.0 : 0.7;
    c.group_exponent = u(rng) < 0.5 ? 1.0 : 2.0;
    return c;
}

} // namespace

TEST_CASE("valid schedules pass and cache variances") {
    const Schedule s = validate_schedule(basic_r1());
    CHECK(s.r() == 1);
    CHECK(s.level_variance(1).u4 == Catch::Approx(1.0 - 0.25));
    CHECK(s.level_variance(2).u4 == Catch::Approx(0.25));

    LiftingSchedule c;
    c.r = 2;
    c.m_schedule = {1.0, 0.8, 0.3, 0.0};
    c.p_schedule = {1.0, 0.7, 0.2, 0.0};
    c.q_schedule = {1.0, 0.7, 0.2, 0.0};
    const Schedule s2 = validate_schedule(c);
    CHECK(s2.level_variance(2).u4 == Catch::Approx(0.7 * 0.7 - 0.2 * 0.2).epsilon(1e-15));
    CHECK(s2.level_variance(2).u2 == Catch::Approx(0.5).epsilon(1e-15));
    CHECK(s2.level_variance(2).h == Catch::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("chain violations are reported with the first offending index") {
    LiftingSchedule c = basic_r1();
    c.r = 2;
    c.m_schedule = {1.0, 0.8, 0.3, 0.0};
    c.p_schedule = {1.0, 0.4, 0.6, 0.0};
    c.q_schedule = {1.0, 0.7, 0.2, 0.0};
    CHECK_THROWS_WITH(validate_schedule(c), "pSchedule not nonincreasing at index 2");
}

TEST_CASE("scalar parameter errors") {
    LiftingSchedule c = basic_r1();
    c.s = 0.0;
    CHECK_THROWS_AS(validate_schedule(c), ValidationError);
    c = basic_r1();
    c.beta = -1.0;
    CHECK_THROWS_AS(validate_schedule(c), ValidationError);
    c = basic_r1();
    c.m_schedule = {0.9, 0.5, 0.0};
    CHECK_THROWS_AS(validate_schedule(c), ValidationError);
    c = basic_r1();
    c.m_schedule = {1.0, 0.5, 0.1};
    CHECK_THROWS_AS(validate_schedule(c), ValidationError);
    c = basic_r1();
    c.m_schedule = {1.0, 1.2, 0.0}; // interior exponents stay in (0,1]
    CHECK_THROWS_AS(validate_schedule(c), ValidationError);
    c = basic_r1();
    c.group_exponent = 0.0;
    CHECK_THROWS_AS(validate_schedule(c), ValidationError);
}

TEST_CASE("equal adjacent entries (zero variance) are allowed") {
    LiftingSchedule c = basic_r1();
    c.p_schedule = {1.0, 1.0, 0.0};
    c.q_schedule = {1.0, 1.0, 0.0};
    const Schedule s = validate_schedule(c);
    CHECK(s.level_variance(1).degenerate());
}

TEST_CASE("validation is idempotent, byte-identically") {
    const Schedule a = validate_schedule(basic_r1());
    const Schedule b = validate_schedule(a.params());
    const auto& pa = a.params();
    const auto& pb = b.params();
    CHECK(std::memcmp(pa.m_schedule.data(), pb.m_schedule.data(),
                      pa.m_schedule.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(pa.p_schedule.data(), pb.p_schedule.data(),
                      pa.p_schedule.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(pa.q_schedule.data(), pb.q_schedule.data(),
                      pa.q_schedule.size() * sizeof(double)) == 0);
    CHECK(pa.beta == pb.beta);
    CHECK(pa.s == pb.s);
}

TEST_CASE("telescoping cancellation over random schedules") {
    std::mt19937 rng(11);
    for (int rep = 0; rep < 40; ++rep) {
        const int r = 1 + static_cast<int>(rng() % 4);
        const Schedule s = validate_schedule(random_schedule(r, rng));
        double sum_p = 0.0, sum_q = 0.0, sum_pq = 0.0;
        for (int k = 1; k <= r + 1; ++k) {
            sum_p += s.level_variance(k).u2;
            sum_q += s.level_variance(k).h;
            sum_pq += s.level_variance(k).u4;
        }
        CHECK(sum_p == Catch::Approx(s.p(0)).margin(1e-12));
        CHECK(sum_q == Catch::Approx(s.q(0)).margin(1e-12));
        CHECK(sum_pq == Catch::Approx(s.p(0) * s.q(0)).margin(1e-12));
    }
}

TEST_CASE("omega selector") {
    CHECK(omega(1, 7.0) == 1.0);
    CHECK(omega(2, 7.0) == 7.0);
    CHECK(omega(5, 1.0) == 1.0);
    CHECK_THROWS_AS(omega(0, 1.0), ValidationError);
}

TEST_CASE("flat record serialization") {
    const Schedule s = validate_schedule(basic_r1());
    const auto rec = s.to_record();
    CHECK(rec.at("r") == "1");
    CHECK(rec.at("m_schedule") == "1,0.5,0");
    CHECK(rec.at("beta") == "1");
    CHECK(rec.at("s") == "-1");
    CHECK(rec.count("group_exponent") == 1);
}
