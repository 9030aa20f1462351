#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "blirp/interpolator.hpp"
#include "blirp/perceptron.hpp"

using namespace blirp;

namespace {

Schedule make_sched(int r, std::vector<double> m, std::vector<double> p, std::vector<double> q,
                    double beta = 1.0, double s = -1.0, double gp = 1.0) {
    LiftingSchedule c;
    c.r = r;
    c.m_schedule = std::move(m);
    c.p_schedule = std::move(p);
    c.q_schedule = std::move(q);
    c.beta = beta;
    c.s = s;
    c.group_exponent = gp;
    return validate_schedule(c);
}

// independent closed form for l = 1, unit norms, zero anchor, r = 1,
// p = q = [1, a, 0]: chained Gaussian moment generating functions give
// psi(t) = |s| beta^2 m_1 sigma1^2(t) / (2 sqrt(n)),
// sigma1^2(t) = 2 (1-t)(1-a) + t (1-a^2).
double lognormal_psi(double a, double t, double beta, double s, double m1, int n) {
    const double sig2 = 2.0 * (1.0 - t) * (1.0 - a) + t * (1.0 - a * a);
    return std::abs(s) * beta * beta * m1 * sig2 / (2.0 * std::sqrt(static_cast<double>(n)));
}

} // namespace

TEST_CASE("zeta ladder: constant samples collapse the expectation") {
    const Schedule s = make_sched(2, {1, 0.8, 0.4, 0}, {1, 0.5, 0.2, 0}, {1, 0.5, 0.2, 0});
    // every zeta_1 sample equal to c > 0  ->  log zeta_k = (m_k/m_1) log c
    const double log_c = 1.7;
    ZetaSampleNode root;
    for (int j = 0; j < 3; ++j) {
        ZetaSampleNode level2;
        // single leaf, single anchor, log Z = log_c / m_1 and p = 1
        level2.leaf_log_z = {Vec{log_c / 0.8}};
        root.children.push_back(level2);
    }
    const ZetaLadder ladder = zeta_ladder(root, s);
    CHECK(ladder.values[0][0] == Catch::Approx(log_c).epsilon(1e-12));
    CHECK(ladder.top() == Catch::Approx((0.4 / 0.8) * log_c).epsilon(1e-12));
}

TEST_CASE("zeta ladder: ratio one with a single degenerate sample is the identity") {
    const Schedule s = make_sched(2, {1, 0.6, 0.6, 0}, {1, 0.5, 0.5, 0}, {1, 0.5, 0.5, 0});
    ZetaSampleNode root;
    ZetaSampleNode level2;
    level2.leaf_log_z = {Vec{2.0}, Vec{3.0}};
    root.children.push_back(level2);
    const ZetaLadder ladder = zeta_ladder(root, s);
    CHECK(ladder.top() == Catch::Approx(ladder.values[0][0]).epsilon(1e-15));
}

TEST_CASE("zeta ladder: frozen two-sample oracle") {
    // zeta_1 samples {e, e^3} and m_2/m_1 = 0.5:
    // log zeta_2 = log((e^0.5 + e^1.5)/2) = 1.1201145069582774 by direct
    // arithmetic (the independent oracle computed with std::exp/std::log).
    const double expected = std::log((std::exp(0.5) + std::exp(1.5)) / 2.0);
    CHECK(expected == Catch::Approx(1.1201145069582774).epsilon(1e-15));
    const Schedule s = make_sched(2, {1, 1.0, 0.5, 0}, {1, 0.5, 0.2, 0}, {1, 0.5, 0.2, 0});
    ZetaSampleNode root;
    for (double lz : {1.0, 3.0}) {
        ZetaSampleNode level2;
        level2.leaf_log_z = {Vec{lz}}; // m_1 = 1, p = 1 -> zeta_1 = Z
        root.children.push_back(level2);
    }
    const ZetaLadder ladder = zeta_ladder(root, s);
    CHECK(ladder.top() == Catch::Approx(expected).epsilon(1e-12));
    CHECK(ladder.sample_counts[1] == 2);
}

TEST_CASE("zeta ladder rejects empty levels") {
    const Schedule s = make_sched(2, {1, 0.6, 0.3, 0}, {1, 0.5, 0.2, 0}, {1, 0.5, 0.2, 0});
    ZetaSampleNode root; // no children at all
    CHECK_THROWS_AS(zeta_ladder(root, s), NumericalError);
}

TEST_CASE("beta = 0 removes all randomness: psi exactly log(l * l^((1+s) m1 p)) / (p|s| sqrt(n) m1)") {
    const int l = 3, n = 4;
    auto xs = perceptron::build_sphere_samples(n, l, false, 5);
    auto ys = perceptron::build_sphere_samples(n, l, true, 6);
    ConfigurationSets sets(xs, xs, ys);
    const double m1 = 0.5, s_val = -1.0, gp = 2.0;
    const Schedule sched = make_sched(1, {1, m1, 0}, {1, 0.5, 0}, {1, 0.5, 0}, 0.0, s_val, gp);
    McPlan plan;
    plan.outer_samples = 3;
    plan.per_level = {5};
    plan.seed = 8;
    const MeanAndSe est = psi_estimate(sets, sched, 0.7, plan);
    const double ld = static_cast<double>(l);
    const double expected = std::log(ld * std::pow(std::pow(ld, (1.0 + s_val) * m1), gp)) /
                            (gp * std::abs(s_val) * std::sqrt(static_cast<double>(n)) * m1);
    CHECK(est.value == Catch::Approx(expected).margin(1e-12));
    CHECK(est.se <= 1e-12);
}

TEST_CASE("constant anchor shifts psi by sign(s) beta c / sqrt(n) exactly") {
    const int l = 3, n = 4;
    auto xs = perceptron::build_sphere_samples(n, l, false, 15);
    auto ys = perceptron::build_sphere_samples(n, l, true, 16);
    const double c_shift = 0.37;
    AnchorFn constant = [&](std::span<const double>, std::span<const double>) { return c_shift; };
    ConfigurationSets plain(xs, xs, ys);
    ConfigurationSets shifted(xs, xs, ys, constant);
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 0.5, 0}, {1, 0.5, 0}, 1.3, -1.0, 2.0);
    McPlan plan;
    plan.outer_samples = 6;
    plan.per_level = {24};
    plan.seed = 17;
    const double a = psi_estimate(plain, sched, 0.4, plan).value;
    const double b = psi_estimate(shifted, sched, 0.4, plan).value;
    const double expect_shift = -1.3 * c_shift / std::sqrt(static_cast<double>(n)); // sign(s) beta c / sqrt(n)
    CHECK(b - a == Catch::Approx(expect_shift).margin(1e-11));
}

TEST_CASE("level collapse: degenerate U_2 merges r = 2 into r = 1 on shared draws") {
    for (std::uint64_t seed : {101, 202, 303, 404, 505}) {
        auto xs = perceptron::build_sphere_samples(4, 3, false, seed);
        auto ys = perceptron::build_sphere_samples(4, 3, true, seed + 1);
        ConfigurationSets sets(xs, xs, ys);
        const Schedule r1 = make_sched(1, {1, 0.6, 0}, {1, 0.4, 0}, {1, 0.35, 0});
        const Schedule r2 =
            make_sched(2, {1, 0.6, 0.25, 0}, {1, 0.4, 0.4, 0}, {1, 0.35, 0.35, 0});
        McPlan p1;
        p1.outer_samples = 4;
        p1.per_level = {16};
        p1.seed = seed;
        McPlan p2 = p1;
        p2.per_level = {16, 1};
        const double t = 0.3 + 0.1 * static_cast<double>(seed % 3);
        const MeanAndSe a = psi_estimate(sets, r1, t, p1);
        const MeanAndSe b = psi_estimate(sets, r2, t, p2);
        CHECK(std::abs(a.value - b.value) <= 1e-10);
    }
}

TEST_CASE("psi estimates from disjoint seeds agree within 4 combined SEs") {
    auto xs = perceptron::build_sphere_samples(4, 3, false, 31);
    auto ys = perceptron::build_sphere_samples(4, 3, true, 32);
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 0.5, 0}, {1, 0.5, 0});
    McPlan a;
    a.outer_samples = 3000;
    a.per_level = {32};
    a.seed = 1000;
    McPlan b = a;
    b.seed = 2000;
    const MeanAndSe ea = psi_estimate(sets, sched, 0.5, a, 2);
    const MeanAndSe eb = psi_estimate(sets, sched, 0.5, b, 2);
    const double z = (ea.value - eb.value) / std::sqrt(ea.se * ea.se + eb.se * eb.se);
    CHECK(std::abs(z) <= 4.0);
}

TEST_CASE("l = 1 lognormal oracle: MC matches the closed form within 3 SE") {
    std::vector<Vec> xs = {{1.0}}, ys = {{1.0}};
    ConfigurationSets sets(xs, xs, ys);
    for (double a : {0.0, 0.5}) {
        const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, a, 0}, {1, a, 0});
        McPlan plan;
        plan.outer_samples = 4000;
        plan.per_level = {300};
        plan.seed = 2233;
        for (double t : {0.2, 0.8}) {
            const MeanAndSe est = psi_estimate(sets, sched, t, plan, 2);
            const double exact = lognormal_psi(a, t, 1.0, -1.0, 0.5, 1);
            CHECK(std::abs(est.value - exact) <= 3.0 * est.se);
        }
    }
    // a = 1: U_1 degenerate, psi constant (= 0) in t
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 1.0, 0}, {1, 1.0, 0});
    McPlan plan;
    plan.outer_samples = 4000;
    plan.per_level = {2};
    plan.seed = 2234;
    const MeanAndSe e02 = psi_estimate(sets, sched, 0.2, plan, 2);
    const MeanAndSe e08 = psi_estimate(sets, sched, 0.8, plan, 2);
    CHECK(std::abs(e02.value) <= 3.0 * e02.se);
    CHECK(std::abs(e02.value - e08.value) <=
          3.0 * std::sqrt(e02.se * e02.se + e08.se * e08.se));
}

TEST_CASE("plan and t validation") {
    std::vector<Vec> xs = {{1.0}}, ys = {{1.0}};
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 0.5, 0}, {1, 0.5, 0});
    McPlan plan;
    plan.outer_samples = 0;
    plan.per_level = {4};
    CHECK_THROWS_AS(psi_estimate(sets, sched, 0.5, plan), ValidationError);
    plan.outer_samples = 2;
    plan.per_level = {0};
    CHECK_THROWS_AS(psi_estimate(sets, sched, 0.5, plan), ValidationError);
    plan.per_level = {4};
    CHECK_THROWS_AS(psi_estimate(sets, sched, 1.5, plan), ValidationError);
}

TEST_CASE("worker count never changes results") {
    auto xs = perceptron::build_sphere_samples(3, 2, false, 41);
    auto ys = perceptron::build_sphere_samples(3, 2, true, 42);
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(2, {1, 0.7, 0.3, 0}, {1, 0.6, 0.2, 0}, {1, 0.6, 0.2, 0});
    McPlan plan;
    plan.outer_samples = 9;
    plan.per_level = {6, 4};
    plan.seed = 77;
    const MeanAndSe one = psi_estimate(sets, sched, 0.45, plan, 1);
    const MeanAndSe four = psi_estimate(sets, sched, 0.45, plan, 4);
    CHECK(one.value == four.value);
    CHECK(one.se == four.se);
}

TEST_CASE("materialized tree psi equals the streaming engine") {
    auto xs = perceptron::build_sphere_samples(3, 2, false, 51);
    auto ys = perceptron::build_sphere_samples(3, 2, true, 52);
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(2, {1, 0.8, 0.4, 0}, {1, 0.5, 0.25, 0}, {1, 0.5, 0.25, 0});
    McPlan plan;
    plan.outer_samples = 3;
    plan.per_level = {5, 4};
    plan.seed = 99;
    const SampleTree tree = build_sample_tree(sets, sched, 0.6, plan);
    const Vec tree_psi = tree_psi_per_outer(tree, sets, sched);
    const MeanAndSe engine = psi_estimate(sets, sched, 0.6, plan);
    CHECK(mean_and_se(tree_psi).value == Catch::Approx(engine.value).epsilon(1e-12));
}
