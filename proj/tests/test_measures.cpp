#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "blirp/measures.hpp"
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

Schedule random_sched(int r, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> m(static_cast<std::size_t>(r) + 2), p(m.size()), q(m.size());
    m.front() = 1.0;
    p.front() = 0.4 + 0.6 * u(rng);
    q.front() = 0.4 + 0.6 * u(rng);
    for (int k = 1; k <= r; ++k) {
        m[static_cast<std::size_t>(k)] = m[static_cast<std::size_t>(k) - 1] * (0.4 + 0.6 * u(rng));
        p[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k) - 1] * u(rng);
        q[static_cast<std::size_t>(k)] = q[static_cast<std::size_t>(k) - 1] * u(rng);
    }
    m.back() = p.back() = q.back() = 0.0;
    return make_sched(r, m, p, q, 0.5 + u(rng), u(rng) < 0.5 ? -1.0 : 0.8,
                      u(rng) < 0.5 ? 1.0 : 2.0);
}

} // namespace

TEST_CASE("phi_u1_weights") {
    Vec equal = {4.0, 4.0, 4.0};
    WeightVector w = phi_u1_weights(equal, 0.7);
    for (double x : w.weights) CHECK(x == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(w.stored_sum == Catch::Approx(1.0).margin(1e-12));

    // m1 -> 0 gives uniform regardless of the samples
    Vec distinct = {0.0, 5.0, -3.0};
    w = phi_u1_weights(distinct, 1e-14);
    for (double x : w.weights) CHECK(x == Catch::Approx(1.0 / 3.0).epsilon(1e-10));

    // frozen: logZ = {0, log 3}, m1 = 1 -> {1/4, 3/4}
    Vec lz = {0.0, std::log(3.0)};
    w = phi_u1_weights(lz, 1.0);
    CHECK(w.weights[0] == Catch::Approx(0.25).epsilon(1e-12));
    CHECK(w.weights[1] == Catch::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("phi_uk_weights") {
    Vec same = {1.0, 1.0};
    WeightVector w = phi_uk_weights(same, 1.0);
    CHECK(w.weights[0] == Catch::Approx(0.5).epsilon(1e-15));

    Vec one = {2.3};
    w = phi_uk_weights(one, 0.4);
    CHECK(w.weights[0] == 1.0);

    // frozen: samples {e^2, e^4}, ratio 0.5 -> {1/(1+e), e/(1+e)}
    Vec lz = {2.0, 4.0};
    w = phi_uk_weights(lz, 0.5);
    CHECK(w.weights[0] == Catch::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-12));
    CHECK(w.weights[1] == Catch::Approx(std::exp(1.0) / (1.0 + std::exp(1.0))).epsilon(1e-12));
}

TEST_CASE("gamma00 distribution") {
    Vec single = {0.9};
    CHECK(gamma00_distribution(single, 3.0)[0] == 1.0);
    Vec equal = {1.1, 1.1, 1.1, 1.1};
    for (double x : gamma00_distribution(equal, 5.0))
        CHECK(x == Catch::Approx(0.25).epsilon(1e-15));
    // frozen: log-means {0, log 2}, p = 2 -> {1/5, 4/5}
    Vec lm = {0.0, std::log(2.0)};
    const Vec g = gamma00_distribution(lm, 2.0);
    CHECK(g[0] == Catch::Approx(0.2).epsilon(1e-12));
    CHECK(g[1] == Catch::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("every family is a valid measure across r in {1,2,3}") {
    std::mt19937 rng(4242);
    const Observable one = [](const IndexTuple&) { return 1.0; };
    for (int r : {1, 2, 3}) {
        for (int rep = 0; rep < 3; ++rep) {
            const std::uint64_t seed = 1000 * static_cast<std::uint64_t>(r) +
                                       static_cast<std::uint64_t>(rep);
            auto xs = perceptron::build_sphere_samples(4, 3, false, seed);
            auto ys = perceptron::build_sphere_samples(4, 3, true, seed + 7);
            ConfigurationSets sets(xs, xs, ys);
            const Schedule sched = random_sched(r, rng);
            McPlan plan;
            plan.outer_samples = 2;
            plan.per_level.assign(static_cast<std::size_t>(r), 4);
            plan.seed = seed;
            const SampleTree tree = build_sample_tree(sets, sched, 0.55, plan);
            for (const FamilyId& fam : all_families(r)) {
                const GammaAverage g = gamma_average(tree, sets, sched, fam, one);
                INFO(fam.name() << " at r=" << r);
                CHECK(std::abs(g.value - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("audit handles excluded pairs and large logZ spread") {
    // one excluded (i1, i3) pair: weights renormalize over the support
    std::vector<Vec> xs = {{1.0, 0.0}, {0.0, 1.0}}, ys = {{1.0, 0.0}, {0.0, 1.0}};
    std::vector<std::vector<int>> restriction = {{0}, {0, 1}};
    ConfigurationSets sets(xs, xs, ys, nullptr, restriction);
    const Schedule sched = make_sched(1, {1, 0.6, 0}, {1, 0.5, 0}, {1, 0.5, 0});
    McPlan plan;
    plan.outer_samples = 3;
    plan.per_level = {6};
    plan.seed = 5;
    SampleTree tree = build_sample_tree(sets, sched, 0.4, plan);
    AuditReport rep = normalization_audit(tree, sets, sched, all_families(1));
    CHECK(rep.max_deviation <= 1e-12);

    // adversarial spread: shift one leaf's logZ by 1e3; still exactly normalized
    tree.outer[0].leaves[0].log_z[0] += 1e3;
    tree.outer[0].leaves[1].log_z[1] -= 1e3;
    rep = normalization_audit(tree, sets, sched, all_families(1));
    CHECK(rep.max_deviation <= 1e-12);
    CHECK(rep.min_ess_per_level[0] >= 1.0);
}

TEST_CASE("gamma2 is gamma21, bit-identically") {
    auto xs = perceptron::build_sphere_samples(3, 2, false, 61);
    auto ys = perceptron::build_sphere_samples(3, 2, true, 62);
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(2, {1, 0.7, 0.3, 0}, {1, 0.5, 0.2, 0}, {1, 0.5, 0.2, 0});
    McPlan plan;
    plan.outer_samples = 2;
    plan.per_level = {4, 3};
    plan.seed = 9;
    const SampleTree tree = build_sample_tree(sets, sched, 0.5, plan);
    const Observable obs = [&](const IndexTuple& ix) {
        return dot(sets.x_set()[static_cast<std::size_t>(ix.i1)],
                   sets.x_set()[static_cast<std::size_t>(ix.p1)]) *
               dot(sets.y_set()[static_cast<std::size_t>(ix.i2)],
                   sets.y_set()[static_cast<std::size_t>(ix.p2)]);
    };
    const GammaAverage a = gamma_average(tree, sets, sched, FamilyId::g2(), obs);
    const GammaAverage b = gamma_average(tree, sets, sched, FamilyId::g21(), obs);
    CHECK(a.value == b.value);
    CHECK(a.se == b.se);
    CHECK(a.family.name() == "gamma21");
}

TEST_CASE("gamma1 replica symmetry under tuple swap") {
    auto xs = perceptron::build_sphere_samples(4, 3, false, 71);
    auto ys = perceptron::build_sphere_samples(4, 3, true, 72);
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 0.5, 0}, {1, 0.5, 0});
    McPlan plan;
    plan.outer_samples = 3;
    plan.per_level = {8};
    plan.seed = 12;
    const SampleTree tree = build_sample_tree(sets, sched, 0.35, plan);
    // asymmetric observable versus its symmetrization: gamma_1 averages agree
    const Observable raw = [](const IndexTuple& ix) {
        return static_cast<double>(2 * ix.i1 + 3 * ix.i2) + 0.1 * static_cast<double>(ix.p2);
    };
    const Observable swapped = [](const IndexTuple& ix) {
        return static_cast<double>(2 * ix.p1 + 3 * ix.p2) + 0.1 * static_cast<double>(ix.i2);
    };
    const double a = gamma_average(tree, sets, sched, FamilyId::g1(), raw).value;
    const double b = gamma_average(tree, sets, sched, FamilyId::g1(), swapped).value;
    CHECK(a == Catch::Approx(b).epsilon(1e-12));
}

TEST_CASE("beta = 0 reduces gamma_0-type families to uniform enumeration") {
    const int l = 2;
    auto xs = perceptron::build_sphere_samples(3, l, false, 81);
    auto ys = perceptron::build_sphere_samples(3, l, true, 82);
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 0.5, 0}, {1, 0.5, 0}, 0.0);
    McPlan plan;
    plan.outer_samples = 1;
    plan.per_level = {3};
    plan.seed = 31;
    const SampleTree tree = build_sample_tree(sets, sched, 0.5, plan);

    // <y(p2)' y(i2)>_{gamma02} = mean over the l x l grid of pair inner
    // products (exhaustive enumeration oracle under the uniform measure)
    double grid_mean = 0.0;
    for (int i2 = 0; i2 < l; ++i2)
        for (int p2 = 0; p2 < l; ++p2)
            grid_mean += dot(ys[static_cast<std::size_t>(i2)], ys[static_cast<std::size_t>(p2)]);
    grid_mean /= static_cast<double>(l * l);

    const Observable obs = [&](const IndexTuple& ix) {
        return dot(ys[static_cast<std::size_t>(ix.p2)], ys[static_cast<std::size_t>(ix.i2)]);
    };
    const GammaAverage g = gamma_average(tree, sets, sched, FamilyId::g02(), obs);
    CHECK(g.value == Catch::Approx(grid_mean).margin(1e-12));
}

TEST_CASE("single-atom averages are exact") {
    std::vector<Vec> xs = {{1.0}}, ys = {{1.0}};
    ConfigurationSets sets(xs, xs, ys);
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 0.5, 0}, {1, 0.5, 0});
    McPlan plan;
    plan.outer_samples = 2;
    plan.per_level = {4};
    plan.seed = 3;
    const SampleTree tree = build_sample_tree(sets, sched, 0.5, plan);
    const Observable x2y2 = [&](const IndexTuple&) { return 1.0; }; // ||x||^2 ||y||^2 on the atom
    const GammaAverage g = gamma_average(tree, sets, sched, FamilyId::g01(), x2y2);
    CHECK(g.value == Catch::Approx(1.0).margin(1e-12));
    CHECK(g.se <= 1e-12);
}

TEST_CASE("gamma_k family bounds") {
    const Schedule sched = make_sched(1, {1, 0.5, 0}, {1, 0.5, 0}, {1, 0.5, 0});
    auto xs = perceptron::build_sphere_samples(3, 2, false, 91);
    auto ys = perceptron::build_sphere_samples(3, 2, true, 92);
    ConfigurationSets sets(xs, xs, ys);
    McPlan plan;
    plan.outer_samples = 1;
    plan.per_level = {2};
    plan.seed = 1;
    const SampleTree tree = build_sample_tree(sets, sched, 0.5, plan);
    const Observable one = [](const IndexTuple&) { return 1.0; };
    CHECK_THROWS_AS(gamma_average(tree, sets, sched, FamilyId::gamma_k(3), one), ValidationError);
    // gamma_k(2) silently aliases to gamma_21, which exists at r = 1
    CHECK_NOTHROW(gamma_average(tree, sets, sched, FamilyId::gamma_k(2), one));
}
