#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "blirp/ensemble.hpp"
#include "blirp/errors.hpp"
#include "blirp/interpolator.hpp"
#include "blirp/linalg.hpp"
#include "blirp/rng.hpp"
#include "blirp/sets.hpp"

// Perceptron instances over the scaled hypercube: set builders, the
// positive-orthant inner maximization, brute-force ground states via
// Gray-code enumeration, local entropy of the densest solution cluster, and
// the zero-temperature correspondence between psi(1) and the min-max value.

namespace blirp {
namespace perceptron {

// ---------------------------------------------------------------------------
// Set builders
// ---------------------------------------------------------------------------

// Corner of {-1/sqrt(n), +1/sqrt(n)}^n; bit b set means +.
inline Vec corner_vector(std::uint64_t mask, int n) {
    const double c = 1.0 / std::sqrt(static_cast<double>(n));
    Vec x(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) x[static_cast<std::size_t>(b)] = (mask >> b & 1) ? c : -c;
    return x;
}

struct CornerSpec {
    enum class Mode { full, random, explicit_list };
    Mode mode = Mode::random;
    long count = 1;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> corners; // for explicit_list

    static CornerSpec full() { return {Mode::full, 0, 0, {}}; }
    static CornerSpec random(long count, std::uint64_t seed) {
        return {Mode::random, count, seed, {}};
    }
    static CornerSpec explicit_list(std::vector<std::uint64_t> masks) {
        return {Mode::explicit_list, 0, 0, std::move(masks)};
    }
};

// Unit-norm corner subsets of the scaled hypercube.
inline std::vector<Vec> build_binary_sets(int n, const CornerSpec& spec) {
    if (n < 1 || n > 62) throw ValidationError("build_binary_sets: n out of range");
    const std::uint64_t total = 1ULL << n;
    std::vector<Vec> out;
    switch (spec.mode) {
        case CornerSpec::Mode::full:
            if (n > 20) throw ValidationError("build_binary_sets: full enumeration needs n <= 20");
            out.reserve(total);
            for (std::uint64_t mask = 0; mask < total; ++mask) out.push_back(corner_vector(mask, n));
            break;
        case CornerSpec::Mode::random: {
            if (spec.count < 1 || static_cast<std::uint64_t>(spec.count) > total)
                throw ValidationError("build_binary_sets: requested more corners than 2^n");
            std::vector<std::uint64_t> seen;
            std::uint64_t attempt = 0;
            while (seen.size() < static_cast<std::size_t>(spec.count)) {
                const std::uint64_t mask =
                    uniform_bits(spec.seed, {streams::tag_sets, 0, seen.size(), attempt++}) &
                    (total - 1);
                bool dup = false;
                for (std::uint64_t s : seen) dup |= (s == mask);
                if (!dup) seen.push_back(mask);
            }
            for (std::uint64_t mask : seen) out.push_back(corner_vector(mask, n));
            break;
        }
        case CornerSpec::Mode::explicit_list:
            for (std::uint64_t mask : spec.corners) {
                if (mask >= total) throw ValidationError("build_binary_sets: corner mask out of range");
                out.push_back(corner_vector(mask, n));
            }
            break;
    }
    return out;
}

// Unit vectors sampled from the sphere, optionally restricted to the
// positive orthant (absolute value of a standard normal direction).
inline std::vector<Vec> build_sphere_samples(int dim, long count, bool positive_orthant,
                                             std::uint64_t seed) {
    if (dim < 1 || count < 1) throw ValidationError("build_sphere_samples: bad dimensions");
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        Vec v(static_cast<std::size_t>(dim));
        for (int j = 0; j < dim; ++j)
            v[static_cast<std::size_t>(j)] = gaussian_stream(
                seed, {streams::tag_sets, 1, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
        if (positive_orthant)
            for (double& x : v) x = std::abs(x);
        const double nrm = norm2(v);
        for (double& x : v) x /= nrm;
        out.push_back(std::move(v));
    }
    return out;
}

// Soft anchor family f_xbar(x) = nu * (xbar' x - delta_bar).
inline AnchorFn soft_anchor(double nu, double delta_bar) {
    return [nu, delta_bar](std::span<const double> xbar, std::span<const double> x) {
        return nu * (dot(xbar, x) - delta_bar);
    };
}

// Indices of x's whose overlap with xbar matches delta_bar exactly (up to a
// floating tolerance on the hypercube overlap grid).
inline std::vector<int> restrict_overlap(const std::vector<Vec>& x_set, const Vec& xbar,
                                         double delta_bar, double tol = 1e-9) {
    std::vector<int> out;
    for (std::size_t i = 0; i < x_set.size(); ++i)
        if (std::abs(dot(x_set[i], xbar) - delta_bar) <= tol) out.push_back(static_cast<int>(i));
    return out;
}

// Per-anchor restriction table for a whole xbar set.
inline std::vector<std::vector<int>> build_overlap_restriction(const std::vector<Vec>& x_set,
                                                               const std::vector<Vec>& xbar_set,
                                                               double delta_bar,
                                                               double tol = 1e-9) {
    std::vector<std::vector<int>> out;
    out.reserve(xbar_set.size());
    for (const Vec& xb : xbar_set) out.push_back(restrict_overlap(x_set, xb, delta_bar, tol));
    return out;
}

// ---------------------------------------------------------------------------
// Ground states and local entropy
// ---------------------------------------------------------------------------

// max over the positive-orthant unit sphere of y'v: the norm of the positive
// part, attained at v_+ / ||v_+|| when v has a positive component.
inline double max_posorthant(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        if (x > 0.0) s += x * x;
    return std::sqrt(s);
}

struct BinaryInstance {
    int n = 1, m = 1;
    std::uint64_t seed = 1;
    Mat g; // m x n

    double alpha() const { return static_cast<double>(m) / static_cast<double>(n); }
};

inline BinaryInstance make_binary_instance(int n, int m, std::uint64_t seed) {
    if (n < 1 || m < 1) throw ValidationError("binary instance: bad dimensions");
    BinaryInstance inst{n, m, seed, Mat(static_cast<std::size_t>(m), static_cast<std::size_t>(n))};
    for (std::size_t i = 0; i < inst.g.rows; ++i)
        for (std::size_t j = 0; j < inst.g.cols; ++j)
            inst.g(i, j) = gaussian_stream(seed, {streams::tag_instance, i, j});
    return inst;
}

// Bitset over the 2^n hypercube marking solutions (energy <= threshold),
// i.e. corners with G x <= 0 componentwise.
struct SolutionCensus {
    int n = 0;
    double threshold = 1e-10;
    double ground_state_energy = 0.0;
    long long count = 0;
    std::vector<std::uint64_t> bits;

    bool is_solution(std::uint64_t corner) const {
        return (bits[corner >> 6] >> (corner & 63)) & 1;
    }
    void mark(std::uint64_t corner) { bits[corner >> 6] |= 1ULL << (corner & 63); }
};

inline double corner_energy(const BinaryInstance& inst, std::uint64_t mask) {
    const Vec x = corner_vector(mask, inst.n);
    Vec v(static_cast<std::size_t>(inst.m));
    matvec(inst.g, x, v);
    return max_posorthant(v);
}

// Gray-code enumeration of all 2^n corners with incremental G x updates.
// The response vector is recomputed from scratch every 4096 corners, which
// bounds the incremental floating drift well below the solution threshold.
inline SolutionCensus bp_ground_state(const BinaryInstance& inst, double threshold = 1e-10) {
    if (inst.n > 24) throw ValidationError("bp_ground_state: enumeration budget is n <= 24");
    const int n = inst.n;
    const std::uint64_t total = 1ULL << n;
    SolutionCensus census;
    census.n = n;
    census.threshold = threshold;
    census.bits.assign(static_cast<std::size_t>((total + 63) / 64), 0);

    const double step = 2.0 / std::sqrt(static_cast<double>(n));
    Vec v(static_cast<std::size_t>(inst.m));
    double best = std::numeric_limits<double>::infinity();

    std::uint64_t code = 0;
    for (std::uint64_t i = 0; i < total; ++i) {
        if (i == 0 || (i & 0xfff) == 0) {
            // refresh v = G x at the current corner
            const Vec x = corner_vector(code, n);
            matvec(inst.g, x, v);
        }
        const double e = max_posorthant(v);
        if (e < best) best = e;
        if (e <= threshold) {
            census.mark(code);
            ++census.count;
        }
        if (i + 1 == total) break;
        const int flip = std::countr_zero(i + 1);
        const std::uint64_t next = code ^ (1ULL << flip);
        const double delta = (next >> flip & 1) ? step : -step;
        for (std::size_t row = 0; row < v.size(); ++row)
            v[row] += delta * inst.g(row, static_cast<std::size_t>(flip));
        code = next;
    }
    census.ground_state_energy = census.count > 0 ? 0.0 : best;
    return census;
}

enum class ReferencePolicy { all_corners, solutions_only };

struct LocalEntropyPoint {
    int d = 0;              // Hamming distance
    double overlap = 1.0;   // 1 - 2d/n
    long long best_reference = -1;
    long long cluster_count = 0;
    double sigma = 0.0;     // (1/n) log(cluster_count); meaningless when empty
    bool empty = true;
};

// sigma(delta_bar) over the whole distance grid d = 0..n: for each admissible
// reference corner, count solutions at Hamming distance exactly d, and keep
// the densest reference per d.
inline std::vector<LocalEntropyPoint> local_entropy_curve(const BinaryInstance& inst,
                                                          const SolutionCensus& census,
                                                          ReferencePolicy policy) {
    if (inst.n > 18) throw ValidationError("local_entropy: budget is n <= 18");
    const int n = inst.n;
    const std::uint64_t total = 1ULL << n;

    std::vector<std::uint64_t> solutions;
    solutions.reserve(static_cast<std::size_t>(census.count));
    for (std::uint64_t c = 0; c < total; ++c)
        if (census.is_solution(c)) solutions.push_back(c);

    std::vector<LocalEntropyPoint> curve(static_cast<std::size_t>(n) + 1);
    for (int d = 0; d <= n; ++d) {
        curve[static_cast<std::size_t>(d)].d = d;
        curve[static_cast<std::size_t>(d)].overlap = 1.0 - 2.0 * d / static_cast<double>(n);
    }
    std::vector<long long> hist(static_cast<std::size_t>(n) + 1);
    for (std::uint64_t ref = 0; ref < total; ++ref) {
        if (policy == ReferencePolicy::solutions_only && !census.is_solution(ref)) continue;
        std::fill(hist.begin(), hist.end(), 0);
        for (std::uint64_t s : solutions)
            ++hist[static_cast<std::size_t>(std::popcount(ref ^ s))];
        for (int d = 0; d <= n; ++d) {
            LocalEntropyPoint& pt = curve[static_cast<std::size_t>(d)];
            if (hist[static_cast<std::size_t>(d)] > pt.cluster_count) {
                pt.cluster_count = hist[static_cast<std::size_t>(d)];
                pt.best_reference = static_cast<long long>(ref);
            }
        }
    }
    for (LocalEntropyPoint& pt : curve) {
        pt.empty = pt.cluster_count == 0;
        pt.sigma = pt.empty ? 0.0
                            : std::log(static_cast<double>(pt.cluster_count)) / static_cast<double>(n);
    }
    return curve;
}

inline LocalEntropyPoint local_entropy(const BinaryInstance& inst, const SolutionCensus& census,
                                       int d, ReferencePolicy policy) {
    if (d < 0 || d > inst.n) throw ValidationError("local_entropy: d must lie in [0, n]");
    return local_entropy_curve(inst, census, policy)[static_cast<std::size_t>(d)];
}

// ---------------------------------------------------------------------------
// Zero-temperature correspondence
// ---------------------------------------------------------------------------

struct ZeroTemperatureReport {
    double psi = 0.0;
    double psi_se = 0.0;
    double psi_scaled = 0.0; // |psi(1)| sqrt(n) / beta
    double min_max = 0.0;    // min_x max_y y' G x by enumeration
    // The sign convention between psi(1)/beta and the min-max is unsettled
    // (the s = -1 bookkeeping yields the negative of the min-max), so the
    // gap compares magnitudes and both observed signs are recorded. Over a
    // finite sampled Y the enumerated min-max itself can be negative.
    double gap = 0.0; // | |psi(1)| sqrt(n)/beta - |min_max| |
    int psi_sign = 0;
    int min_max_sign = 0;
};

// psi(1) at s = -1, p = 1, r = 1, m = [1,1,0], p = q = [1,1,0] on a quenched
// instance versus the enumerated min-max. U_1 is degenerate there and the
// common outer u4 shift has zero mean, so the gap contract is
// O(log(l)/beta) + Monte Carlo noise.
inline ZeroTemperatureReport zero_temperature_check(const std::vector<Vec>& x_set,
                                                    const std::vector<Vec>& y_set, double beta,
                                                    std::uint64_t seed, long outer_samples,
                                                    int threads = 1) {
    for (const Vec& x : x_set)
        if (std::abs(norm2(x) - 1.0) > 1e-9)
            throw ValidationError("zero_temperature_check: non-unit norms in X");
    for (const Vec& y : y_set)
        if (std::abs(norm2(y) - 1.0) > 1e-9)
            throw ValidationError("zero_temperature_check: non-unit norms in Y");

    LiftingSchedule cand;
    cand.r = 1;
    cand.m_schedule = {1.0, 1.0, 0.0};
    cand.p_schedule = {1.0, 1.0, 0.0};
    cand.q_schedule = {1.0, 1.0, 0.0};
    cand.beta = beta;
    cand.s = -1.0;
    cand.group_exponent = 1.0;
    const Schedule sched = validate_schedule(cand);

    ConfigurationSets sets(x_set, {}, y_set);
    McPlan plan;
    plan.outer_samples = outer_samples;
    plan.per_level = {1}; // U_1 carries zero variance here
    plan.seed = seed;
    plan.fix_g = true;

    const Mat g = draw_g(sets.dims(), plan, 0);
    double min_max = std::numeric_limits<double>::infinity();
    Vec gx(g.rows);
    for (const Vec& x : x_set) {
        matvec(g, x, gx);
        double mx = -std::numeric_limits<double>::infinity();
        for (const Vec& y : y_set) mx = std::max(mx, dot(y, gx));
        min_max = std::min(min_max, mx);
    }

    const MeanAndSe psi = psi_estimate(sets, sched, 1.0, plan, threads);
    const double root_n = std::sqrt(static_cast<double>(sets.x_dim()));
    ZeroTemperatureReport rep;
    rep.psi = psi.value;
    rep.psi_se = psi.se;
    rep.psi_scaled = std::abs(psi.value) * root_n / beta;
    rep.min_max = min_max;
    rep.gap = std::abs(rep.psi_scaled - std::abs(min_max));
    rep.psi_sign = psi.value > 0 ? 1 : (psi.value < 0 ? -1 : 0);
    rep.min_max_sign = min_max > 0 ? 1 : (min_max < 0 ? -1 : 0);
    return rep;
}

// Run-length-encoded census export with enough metadata to reproduce it.
inline void write_census(const SolutionCensus& census, const BinaryInstance& inst,
                         std::ostream& os) {
    os.precision(17);
    os << "# census v1\n"
       << "n = " << census.n << "\n"
       << "m = " << inst.m << "\n"
       << "seed = " << inst.seed << "\n"
       << "threshold = " << census.threshold << "\n"
       << "ground_state_energy = " << census.ground_state_energy << "\n"
       << "count = " << census.count << "\n";
    const std::uint64_t total = 1ULL << census.n;
    os << "rle = ";
    std::uint64_t pos = 0;
    bool first = true;
    while (pos < total) {
        const bool v = census.is_solution(pos);
        std::uint64_t run = 1;
        while (pos + run < total && census.is_solution(pos + run) == v) ++run;
        if (!first) os << ",";
        os << (v ? 1 : 0) << ":" << run;
        first = false;
        pos += run;
    }
    os << "\n";
}

} // namespace perceptron
} // namespace blirp
