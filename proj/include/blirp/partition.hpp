#pragma once

#include <cmath>
#include <vector>

#include "blirp/ensemble.hpp"
#include "blirp/errors.hpp"
#include "blirp/logspace.hpp"
#include "blirp/schedule.hpp"
#include "blirp/sets.hpp"

// The inner partition objects for one realization of the randomness, kept in
// log domain throughout:
//   log A(i1,i2,i3) = beta ||x(i1)|| * D0(i1,i2,i3)
//   log C(i3,i1)    = logsumexp_{i2} log A
//   log Z(i3)       = logsumexp over admissible i1 of s * log C
// Pairs excluded by the per-anchor restriction carry log A = -inf and are
// skipped in the i1 reduction.

namespace blirp {

struct PartitionTable {
    int l = 0;
    Vec log_a; // (i3, i1, i2)
    Vec log_c; // (i3, i1); -inf on excluded pairs
    Vec log_z; // (i3)

    double log_a_at(int i3, int i1, int i2) const {
        return log_a[(static_cast<std::size_t>(i3) * static_cast<std::size_t>(l) +
                      static_cast<std::size_t>(i1)) * static_cast<std::size_t>(l) +
                     static_cast<std::size_t>(i2)];
    }
    double log_c_at(int i3, int i1) const {
        return log_c[static_cast<std::size_t>(i3) * static_cast<std::size_t>(l) +
                     static_cast<std::size_t>(i1)];
    }
    double log_z_at(int i3) const { return log_z[static_cast<std::size_t>(i3)]; }
};

namespace detail {

// The draw-dependent parts of D0, regrouped by interpolation factor:
//   D0 = sqrt(t) * coupled + sqrt(1-t) * decoupled + anchor.
// coupled(i1,i2)   = y(i2)' G x(i1) + ||x|| ||y|| * sum_k u4_k
// decoupled(i1,i2) = ||x|| * y(i2)' (sum_k u2_k) + ||y|| * (sum_k h_k)' x(i1)
struct FieldParts {
    Mat coupled;
    Mat decoupled;
};

// Accumulated level sums entering D0.
struct LevelSums {
    Vec y_dot_u2; // per i2: y(i2)' sum_k u2_k
    Vec x_dot_h;  // per i1: (sum_k h_k)' x(i1)
    double u4 = 0.0;
};

inline FieldParts field_parts(const ConfigurationSets& sets, const Mat& bilinear,
                              const LevelSums& acc) {
    const int l = sets.set_size();
    FieldParts fp;
    fp.coupled = Mat(static_cast<std::size_t>(l), static_cast<std::size_t>(l));
    fp.decoupled = Mat(static_cast<std::size_t>(l), static_cast<std::size_t>(l));
    for (int i1 = 0; i1 < l; ++i1)
        for (int i2 = 0; i2 < l; ++i2) {
            const auto a = static_cast<std::size_t>(i1);
            const auto b = static_cast<std::size_t>(i2);
            fp.coupled(a, b) = bilinear(b, a) + sets.x_norm(i1) * sets.y_norm(i2) * acc.u4;
            fp.decoupled(a, b) =
                sets.x_norm(i1) * acc.y_dot_u2[b] + sets.y_norm(i2) * acc.x_dot_h[a];
        }
    return fp;
}

// bilinear(i2, i1) = y(i2)' G x(i1)
inline Mat bilinear_table(const ConfigurationSets& sets, const Mat& g) {
    const int l = sets.set_size();
    Mat out(static_cast<std::size_t>(l), static_cast<std::size_t>(l));
    Vec gx(g.rows);
    for (int i1 = 0; i1 < l; ++i1) {
        matvec(g, sets.x_set()[static_cast<std::size_t>(i1)], gx);
        for (int i2 = 0; i2 < l; ++i2)
            out(static_cast<std::size_t>(i2), static_cast<std::size_t>(i1)) =
                dot(sets.y_set()[static_cast<std::size_t>(i2)], gx);
    }
    return out;
}

inline LevelSums level_sums(const ConfigurationSets& sets, const EnsembleDraw& draw) {
    const int l = sets.set_size();
    LevelSums acc;
    acc.y_dot_u2.assign(static_cast<std::size_t>(l), 0.0);
    acc.x_dot_h.assign(static_cast<std::size_t>(l), 0.0);
    for (const UTriple& u : draw.levels) {
        acc.u4 += u.u4;
        for (int i = 0; i < l; ++i) {
            acc.y_dot_u2[static_cast<std::size_t>(i)] += dot(sets.y_set()[static_cast<std::size_t>(i)], u.u2);
            acc.x_dot_h[static_cast<std::size_t>(i)] += dot(u.h, sets.x_set()[static_cast<std::size_t>(i)]);
        }
    }
    return acc;
}

// Fill the table from precomputed field parts. Shared by the reference path
// below and by the streaming evaluator, so both agree on the arithmetic.
inline void fill_partition(const ConfigurationSets& sets, const Schedule& sched, double t,
                           const FieldParts& fp, PartitionTable& out) {
    sets.check_support();
    const int l = sets.set_size();
    const double st = std::sqrt(t), su = std::sqrt(1.0 - t);
    const double s = sched.s();
    out.l = l;
    out.log_a.assign(static_cast<std::size_t>(l) * static_cast<std::size_t>(l) *
                         static_cast<std::size_t>(l),
                     neg_inf);
    out.log_c.assign(static_cast<std::size_t>(l) * static_cast<std::size_t>(l), neg_inf);
    out.log_z.assign(static_cast<std::size_t>(l), neg_inf);

    Vec row(static_cast<std::size_t>(l));
    Vec zterms;
    zterms.reserve(static_cast<std::size_t>(l));
    for (int i3 = 0; i3 < l; ++i3) {
        zterms.clear();
        for (int i1 = 0; i1 < l; ++i1) {
            if (!sets.allowed(i3, i1)) continue;
            const double beta_i1 = sched.beta() * sets.x_norm(i1);
            const double f = sets.anchor_value(i3, i1);
            for (int i2 = 0; i2 < l; ++i2) {
                const auto a = static_cast<std::size_t>(i1), b = static_cast<std::size_t>(i2);
                const double d0 = st * fp.coupled(a, b) + su * fp.decoupled(a, b) + f;
                row[b] = beta_i1 * d0;
            }
            const double lc = log_sum_exp(row);
            out.log_c[static_cast<std::size_t>(i3) * static_cast<std::size_t>(l) +
                      static_cast<std::size_t>(i1)] = lc;
            for (int i2 = 0; i2 < l; ++i2)
                out.log_a[(static_cast<std::size_t>(i3) * static_cast<std::size_t>(l) +
                           static_cast<std::size_t>(i1)) * static_cast<std::size_t>(l) +
                          static_cast<std::size_t>(i2)] = row[static_cast<std::size_t>(i2)];
            zterms.push_back(s * lc);
        }
        out.log_z[static_cast<std::size_t>(i3)] = log_sum_exp(zterms);
    }
}

} // namespace detail

// The interpolated field exponent D0 for one index triple.
inline double field_exponent(const EnsembleDraw& draw, const ConfigurationSets& sets, double t,
                             int i1, int i2, int i3) {
    const int l = sets.set_size();
    if (i1 < 0 || i1 >= l || i2 < 0 || i2 >= l || i3 < 0 || i3 >= l)
        throw ValidationError("field_exponent: index out of range");
    if (!sets.allowed(i3, i1))
        throw NumericalError("field_exponent: pair excluded by the anchor restriction");
    const detail::LevelSums acc = detail::level_sums(sets, draw);
    Vec gx(draw.g.rows);
    matvec(draw.g, sets.x_set()[static_cast<std::size_t>(i1)], gx);
    const double bil = dot(sets.y_set()[static_cast<std::size_t>(i2)], gx);
    const double coupled =
        bil + sets.x_norm(i1) * sets.y_norm(i2) * acc.u4;
    const double decoupled = sets.x_norm(i1) * acc.y_dot_u2[static_cast<std::size_t>(i2)] +
                             sets.y_norm(i2) * acc.x_dot_h[static_cast<std::size_t>(i1)];
    return std::sqrt(t) * coupled + std::sqrt(1.0 - t) * decoupled + sets.anchor_value(i3, i1);
}

// Reference construction of the full table from one materialized draw.
inline PartitionTable build_partition(const EnsembleDraw& draw, const ConfigurationSets& sets,
                                      const Schedule& sched, double t) {
    const Mat bil = detail::bilinear_table(sets, draw.g);
    const detail::LevelSums acc = detail::level_sums(sets, draw);
    PartitionTable out;
    detail::fill_partition(sets, sched, t, detail::field_parts(sets, bil, acc), out);
    return out;
}

} // namespace blirp
