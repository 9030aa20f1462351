#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "blirp/errors.hpp"
#include "blirp/linalg.hpp"
#include "blirp/rng.hpp"
#include "blirp/schedule.hpp"

// Reproducible generation of all Gaussian randomness. Draws are keyed, not
// streamed: G depends on (seed, outer index) only, and the level-k triple
// U_k depends on (seed, outer index, the sampling path restricted to levels
// above k). Re-sampling an inner level therefore never moves an outer one,
// which is exactly the nesting the interpolating function requires, and a
// draw is independent of the t at which it will be consumed (common random
// numbers across t come for free).

namespace blirp {

struct ProblemDims {
    int x_dim = 1; // n
    int y_dim = 1; // m
    int set_size = 1; // l

    void check() const {
        if (x_dim < 1 || y_dim < 1 || set_size < 1)
            throw ValidationError("problem dimensions must all be >= 1");
    }
};

// Monte Carlo budget and stream identity for one experiment.
//   per_level[k-1] = number of U_k samples per level-(k+1) node, k = 1..r.
// fix_g pins G to outer index 0 so one quenched instance can be averaged
// over the remaining randomness.
struct McPlan {
    long outer_samples = 1;
    std::vector<long> per_level;
    std::uint64_t seed = 1;
    bool fix_g = false;

    void check(int r) const {
        if (outer_samples < 1) throw ValidationError("mc plan: outer_samples must be >= 1");
        if (per_level.size() != static_cast<std::size_t>(r))
            throw ValidationError("mc plan: per_level must list one sample count per level 1..r");
        for (long n : per_level)
            if (n < 1) throw ValidationError("mc plan: per-level sample counts must be >= 1");
    }
};

namespace streams {

// Stream tags. The outer triple U_{r+1} lives on a fixed tag rather than on
// tag(r+1) so that runs at different r share outer randomness; paired with
// the mixed-radix path ids below this makes degenerate-level collapses exact
// on shared draws.
inline constexpr std::uint64_t tag_g = 1;
inline constexpr std::uint64_t tag_outer_triple = 2;
inline constexpr std::uint64_t tag_sets = 3;
inline constexpr std::uint64_t tag_instance = 4;
inline std::uint64_t tag_level(int k) { return 16 + static_cast<std::uint64_t>(k); }

inline constexpr std::uint64_t obj_u4 = 0;
inline constexpr std::uint64_t obj_u2 = 1;
inline constexpr std::uint64_t obj_h = 2;

// Mixed-radix id of the path (j_r, ..., j_k); the id of a path whose
// leading components are all zero coincides with the id of the same path
// in a shallower tree, which is what aligns r and r-1 level runs.
inline std::uint64_t flat_path_id(const std::vector<long>& per_level,
                                  const std::vector<long>& path, int k) {
    // path[i] = j_{r-i}, i.e. path is ordered from level r down to level k.
    const int r = static_cast<int>(per_level.size());
    std::uint64_t f = 0;
    for (int lvl = r, i = 0; lvl >= k; --lvl, ++i)
        f = f * static_cast<std::uint64_t>(per_level[static_cast<std::size_t>(lvl) - 1]) +
            static_cast<std::uint64_t>(path[static_cast<std::size_t>(i)]);
    return f;
}

} // namespace streams

// One realization of the level-k triple.
struct UTriple {
    double u4 = 0.0;
    Vec u2; // y-side vector, length m
    Vec h;  // x-side vector, length n
};

namespace detail {

inline double level_sigma(double var) { return var > 0.0 ? std::sqrt(var) : 0.0; }

} // namespace detail

// G is keyed by (seed, outer) alone; entries i.i.d. standard normal.
inline Mat draw_g(const ProblemDims& dims, const McPlan& plan, long outer) {
    const std::uint64_t o = plan.fix_g ? 0 : static_cast<std::uint64_t>(outer);
    Mat g(static_cast<std::size_t>(dims.y_dim), static_cast<std::size_t>(dims.x_dim));
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j)
            g(i, j) = gaussian_stream(plan.seed, {streams::tag_g, o, i, j});
    return g;
}

// U_k for k = 1..r+1. Levels with zero variance store exact zeros so that
// degenerate schedules collapse exactly rather than up to noise.
inline UTriple draw_level(const ProblemDims& dims, const Schedule& sched, const McPlan& plan,
                          long outer, int k, std::uint64_t flat_id) {
    const LevelVariance& v = sched.level_variance(k);
    const double s4 = detail::level_sigma(v.u4);
    const double s2 = detail::level_sigma(v.u2);
    const double sh = detail::level_sigma(v.h);
    const std::uint64_t o = static_cast<std::uint64_t>(outer);
    const bool is_outer = (k == sched.r() + 1);
    const std::uint64_t tag = is_outer ? streams::tag_outer_triple : streams::tag_level(k);

    UTriple u;
    u.u2.assign(static_cast<std::size_t>(dims.y_dim), 0.0);
    u.h.assign(static_cast<std::size_t>(dims.x_dim), 0.0);
    if (s4 > 0.0)
        u.u4 = s4 * gaussian_stream(plan.seed, {tag, o, flat_id, streams::obj_u4, 0});
    if (s2 > 0.0)
        for (std::size_t j = 0; j < u.u2.size(); ++j)
            u.u2[j] = s2 * gaussian_stream(plan.seed, {tag, o, flat_id, streams::obj_u2, j});
    if (sh > 0.0)
        for (std::size_t j = 0; j < u.h.size(); ++j)
            u.h[j] = sh * gaussian_stream(plan.seed, {tag, o, flat_id, streams::obj_h, j});
    return u;
}

struct DrawProvenance {
    std::uint64_t seed = 0;
    long outer = 0;
    std::vector<long> per_level_indices;
};

// One complete assignment of (G, U_1..U_{r+1}) for a specific sampling path.
struct EnsembleDraw {
    Mat g;
    std::vector<UTriple> levels; // levels[k-1] = U_k, k = 1..r+1
    DrawProvenance provenance;
};

// Materialize the draw at path (indices[k-1] = j_k for levels k = 1..r).
inline EnsembleDraw sample_ensemble(const ProblemDims& dims, const Schedule& sched,
                                    const McPlan& plan, long outer,
                                    const std::vector<long>& per_level_indices) {
    dims.check();
    plan.check(sched.r());
    const int r = sched.r();
    if (per_level_indices.size() < static_cast<std::size_t>(r))
        throw ValidationError("sample_ensemble: index tuple shorter than the nesting depth r");
    for (int k = 1; k <= r; ++k) {
        long j = per_level_indices[static_cast<std::size_t>(k) - 1];
        if (j < 0 || j >= plan.per_level[static_cast<std::size_t>(k) - 1])
            throw ValidationError("sample_ensemble: per-level index out of range");
    }

    EnsembleDraw d;
    d.g = draw_g(dims, plan, outer);
    d.levels.reserve(static_cast<std::size_t>(r) + 1);
    for (int k = 1; k <= r; ++k) {
        std::vector<long> path; // j_r .. j_k
        for (int lvl = r; lvl >= k; --lvl)
            path.push_back(per_level_indices[static_cast<std::size_t>(lvl) - 1]);
        const std::uint64_t flat = streams::flat_path_id(plan.per_level, path, k);
        d.levels.push_back(draw_level(dims, sched, plan, outer, k, flat));
    }
    d.levels.push_back(draw_level(dims, sched, plan, outer, r + 1, 0));
    d.provenance = {plan.seed, outer, per_level_indices};
    return d;
}

// Portable text snapshot for cross-implementation comparison.
inline void dump_draw(const EnsembleDraw& d, std::ostream& os) {
    os.precision(17);
    os << "seed " << d.provenance.seed << "\nouter " << d.provenance.outer << "\nindices";
    for (long j : d.provenance.per_level_indices) os << " " << j;
    os << "\nG " << d.g.rows << " " << d.g.cols << "\n";
    for (std::size_t i = 0; i < d.g.rows; ++i) {
        for (std::size_t j = 0; j < d.g.cols; ++j) os << d.g(i, j) << (j + 1 < d.g.cols ? " " : "\n");
    }
    for (std::size_t k = 0; k < d.levels.size(); ++k) {
        const UTriple& u = d.levels[k];
        os << "U " << (k + 1) << "\nu4 " << u.u4 << "\nu2";
        for (double x : u.u2) os << " " << x;
        os << "\nh";
        for (double x : u.h) os << " " << x;
        os << "\n";
    }
}

} // namespace blirp
