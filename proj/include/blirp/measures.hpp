#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "blirp/errors.hpp"
#include "blirp/interpolator.hpp"
#include "blirp/logspace.hpp"
#include "blirp/schedule.hpp"
#include "blirp/sets.hpp"

// The reweighting operators Phi and the gamma measure family. Estimates are
// plug-in and self-normalized: every weight vector is normalized by its own
// sum, so averaging the constant 1 returns 1 up to rounding, for any tree.

namespace blirp {

struct WeightVector {
    Vec weights;
    double stored_sum = 0.0;
};

// Phi_{U_1} weights over U_1 samples at one anchor: w_j ~ exp(m_1 log Z_j).
inline WeightVector phi_u1_weights(std::span<const double> log_z_samples, double m1) {
    if (log_z_samples.empty()) throw ValidationError("phi_u1_weights: no samples");
    Vec scaled(log_z_samples.size());
    for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = m1 * log_z_samples[j];
    WeightVector w{softmax_from_logs(scaled), 0.0};
    w.stored_sum = stable_sum(w.weights);
    return w;
}

// Phi_{U_k} weights over U_k samples: w_j ~ exp((m_k/m_{k-1}) log zeta_j).
inline WeightVector phi_uk_weights(std::span<const double> log_zeta_samples, double ratio) {
    if (log_zeta_samples.empty()) throw ValidationError("phi_uk_weights: no samples");
    Vec scaled(log_zeta_samples.size());
    for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = ratio * log_zeta_samples[j];
    WeightVector w{softmax_from_logs(scaled), 0.0};
    w.stored_sum = stable_sum(w.weights);
    return w;
}

// gamma_00(i3) ~ exp(p * log E_{U_1} Z^{m_1}).
inline Vec gamma00_distribution(std::span<const double> log_means, double group_exponent) {
    Vec scaled(log_means.size());
    for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = group_exponent * log_means[j];
    return softmax_from_logs(scaled);
}

// Index tuple an observable sees. Single-tuple families leave p* = -1;
// families with a shared component copy it into the p-side (p1 = i1 for
// gamma_02, p3 = i3 for gamma_1 / gamma_22).
struct IndexTuple {
    int i1 = -1, i2 = -1, i3 = -1;
    int p1 = -1, p2 = -1, p3 = -1;
};

using Observable = std::function<double(const IndexTuple&)>;

struct FamilyId {
    enum class Kind { g00, g0, g01, g02, g1, g21, g22, gk };
    Kind kind = Kind::g01;
    int k1 = 0; // branch level for Kind::gk

    static FamilyId g00() { return {Kind::g00, 0}; }
    static FamilyId g0() { return {Kind::g0, 0}; }
    static FamilyId g01() { return {Kind::g01, 0}; }
    static FamilyId g02() { return {Kind::g02, 0}; }
    static FamilyId g1() { return {Kind::g1, 0}; }
    static FamilyId g21() { return {Kind::g21, 0}; }
    // gamma_2 is the paper-level alias of gamma_21; identical estimator.
    static FamilyId g2() { return {Kind::g21, 0}; }
    static FamilyId g22() { return {Kind::g22, 0}; }
    static FamilyId gamma_k(int k1) {
        if (k1 == 2) return g21();
        return {Kind::gk, k1};
    }

    std::string name() const {
        switch (kind) {
            case Kind::g00: return "gamma00";
            case Kind::g0: return "gamma0";
            case Kind::g01: return "gamma01";
            case Kind::g02: return "gamma02";
            case Kind::g1: return "gamma1";
            case Kind::g21: return "gamma21";
            case Kind::g22: return "gamma22";
            case Kind::gk: return "gamma" + std::to_string(k1);
        }
        return "?";
    }

    void check_for_level(int r) const {
        if (kind == Kind::gk && (k1 < 3 || k1 > r + 1))
            throw ValidationError("gamma_k family requires 3 <= k1 <= r+1, got k1 = " +
                                  std::to_string(k1));
    }
};

struct GammaAverage {
    FamilyId family;
    double value = 0.0;
    double se = 0.0;
    int r = 1;
};

namespace detail {

// Per-node partial result: a chained scalar once the family has branched,
// the chained single-tuple measure table nu(i1,i2,i3) before that.
struct GEval {
    double value = 0.0;
    Vec nu;
    bool branched = true;
};

struct GammaWalk {
    const ConfigurationSets& sets;
    const Schedule& sched;
    const FamilyId fam;
    const Observable& obs;
    int l;

    std::size_t idx3(int i3, int i1, int i2) const {
        return (static_cast<std::size_t>(i3) * static_cast<std::size_t>(l) +
                static_cast<std::size_t>(i1)) * static_cast<std::size_t>(l) +
               static_cast<std::size_t>(i2);
    }

    // gamma_0 weight of (i1,i2) given i3 on one leaf; zero when excluded.
    double gibbs(const PartitionTable& leaf, int i3, int i1, int i2) const {
        if (!sets.allowed(i3, i1)) return 0.0;
        const double lc = leaf.log_c_at(i3, i1);
        const double spine = std::exp(sched.s() * lc - leaf.log_z_at(i3));
        return spine * std::exp(leaf.log_a_at(i3, i1, i2) - lc);
    }

    double contract_pair(const Vec& nu) const {
        double acc = 0.0;
        IndexTuple ix;
        for (int i3 = 0; i3 < l; ++i3)
            for (int i1 = 0; i1 < l; ++i1)
                for (int i2 = 0; i2 < l; ++i2) {
                    const double wi = nu[idx3(i3, i1, i2)];
                    if (wi == 0.0) continue;
                    ix.i1 = i1; ix.i2 = i2; ix.i3 = i3;
                    for (int p3 = 0; p3 < l; ++p3)
                        for (int p1 = 0; p1 < l; ++p1)
                            for (int p2 = 0; p2 < l; ++p2) {
                                const double wp = nu[idx3(p3, p1, p2)];
                                if (wp == 0.0) continue;
                                ix.p1 = p1; ix.p2 = p2; ix.p3 = p3;
                                acc += wi * wp * obs(ix);
                            }
                }
        return acc;
    }

    GEval level2(const TreeNode& node) const {
        const auto ll = static_cast<std::size_t>(l);
        const std::size_t n1 = node.leaves.size();
        const double m1 = sched.m(1);

        // U_1 reweighting per anchor and the outer gamma_00 mix
        std::vector<Vec> w(ll);
        Vec log_ez(ll);
        Vec scaled(n1);
        for (std::size_t b3 = 0; b3 < ll; ++b3) {
            for (std::size_t j = 0; j < n1; ++j) scaled[j] = m1 * node.leaves[j].log_z[b3];
            log_ez[b3] = log_mean_exp(scaled);
            w[b3] = softmax_from_logs(scaled);
        }
        const Vec g00 = gamma00_distribution(log_ez, sched.group_exponent());

        GEval out;
        IndexTuple ix;
        switch (fam.kind) {
            case FamilyId::Kind::g00: {
                double acc = 0.0;
                for (int i3 = 0; i3 < l; ++i3) {
                    ix = IndexTuple{};
                    ix.i3 = i3;
                    acc += g00[static_cast<std::size_t>(i3)] * obs(ix);
                }
                out.value = acc;
                return out;
            }
            case FamilyId::Kind::g0:
            case FamilyId::Kind::g01: {
                double acc = 0.0;
                for (int i3 = 0; i3 < l; ++i3) {
                    double vi3 = 0.0;
                    for (std::size_t j = 0; j < n1; ++j) {
                        double vj = 0.0;
                        for (int i1 = 0; i1 < l; ++i1)
                            for (int i2 = 0; i2 < l; ++i2) {
                                const double g = gibbs(node.leaves[j], i3, i1, i2);
                                if (g == 0.0) continue;
                                ix = IndexTuple{};
                                ix.i1 = i1; ix.i2 = i2; ix.i3 = i3;
                                vj += g * obs(ix);
                            }
                        vi3 += w[static_cast<std::size_t>(i3)][j] * vj;
                    }
                    acc += g00[static_cast<std::size_t>(i3)] * vi3;
                }
                out.value = acc;
                return out;
            }
            case FamilyId::Kind::g02: {
                double acc = 0.0;
                for (int i3 = 0; i3 < l; ++i3) {
                    double vi3 = 0.0;
                    for (std::size_t j = 0; j < n1; ++j) {
                        const PartitionTable& leaf = node.leaves[j];
                        double vj = 0.0;
                        for (int i1 = 0; i1 < l; ++i1) {
                            if (!sets.allowed(i3, i1)) continue;
                            const double lc = leaf.log_c_at(i3, i1);
                            const double spine = std::exp(sched.s() * lc - leaf.log_z_at(i3));
                            for (int i2 = 0; i2 < l; ++i2)
                                for (int p2 = 0; p2 < l; ++p2) {
                                    const double cc = std::exp(leaf.log_a_at(i3, i1, i2) - lc) *
                                                      std::exp(leaf.log_a_at(i3, i1, p2) - lc);
                                    ix = IndexTuple{};
                                    ix.i1 = i1; ix.i2 = i2; ix.i3 = i3;
                                    ix.p1 = i1; ix.p2 = p2; ix.p3 = i3;
                                    vj += spine * cc * obs(ix);
                                }
                        }
                        vi3 += w[static_cast<std::size_t>(i3)][j] * vj;
                    }
                    acc += g00[static_cast<std::size_t>(i3)] * vi3;
                }
                out.value = acc;
                return out;
            }
            case FamilyId::Kind::g1: {
                double acc = 0.0;
                for (int i3 = 0; i3 < l; ++i3) {
                    double vi3 = 0.0;
                    for (std::size_t j = 0; j < n1; ++j) {
                        const PartitionTable& leaf = node.leaves[j];
                        double vj = 0.0;
                        for (int i1 = 0; i1 < l; ++i1)
                            for (int i2 = 0; i2 < l; ++i2) {
                                const double gi = gibbs(leaf, i3, i1, i2);
                                if (gi == 0.0) continue;
                                for (int p1 = 0; p1 < l; ++p1)
                                    for (int p2 = 0; p2 < l; ++p2) {
                                        const double gp = gibbs(leaf, i3, p1, p2);
                                        if (gp == 0.0) continue;
                                        ix = IndexTuple{};
                                        ix.i1 = i1; ix.i2 = i2; ix.i3 = i3;
                                        ix.p1 = p1; ix.p2 = p2; ix.p3 = i3;
                                        vj += gi * gp * obs(ix);
                                    }
                            }
                        vi3 += w[static_cast<std::size_t>(i3)][j] * vj;
                    }
                    acc += g00[static_cast<std::size_t>(i3)] * vi3;
                }
                out.value = acc;
                return out;
            }
            case FamilyId::Kind::g22: {
                double acc = 0.0;
                Vec mu(static_cast<std::size_t>(l) * static_cast<std::size_t>(l));
                for (int i3 = 0; i3 < l; ++i3) {
                    std::fill(mu.begin(), mu.end(), 0.0);
                    for (std::size_t j = 0; j < n1; ++j)
                        for (int i1 = 0; i1 < l; ++i1)
                            for (int i2 = 0; i2 < l; ++i2)
                                mu[static_cast<std::size_t>(i1) * static_cast<std::size_t>(l) +
                                   static_cast<std::size_t>(i2)] +=
                                    w[static_cast<std::size_t>(i3)][j] *
                                    gibbs(node.leaves[j], i3, i1, i2);
                    double vi3 = 0.0;
                    for (int i1 = 0; i1 < l; ++i1)
                        for (int i2 = 0; i2 < l; ++i2) {
                            const double wi = mu[static_cast<std::size_t>(i1) * static_cast<std::size_t>(l) +
                                                 static_cast<std::size_t>(i2)];
                            if (wi == 0.0) continue;
                            for (int p1 = 0; p1 < l; ++p1)
                                for (int p2 = 0; p2 < l; ++p2) {
                                    const double wp =
                                        mu[static_cast<std::size_t>(p1) * static_cast<std::size_t>(l) +
                                           static_cast<std::size_t>(p2)];
                                    if (wp == 0.0) continue;
                                    ix = IndexTuple{};
                                    ix.i1 = i1; ix.i2 = i2; ix.i3 = i3;
                                    ix.p1 = p1; ix.p2 = p2; ix.p3 = i3;
                                    vi3 += wi * wp * obs(ix);
                                }
                        }
                    acc += g00[static_cast<std::size_t>(i3)] * vi3;
                }
                out.value = acc;
                return out;
            }
            case FamilyId::Kind::g21:
            case FamilyId::Kind::gk: {
                // single-tuple chained table nu(i1,i2,i3)
                out.nu.assign(static_cast<std::size_t>(l) * static_cast<std::size_t>(l) *
                                  static_cast<std::size_t>(l),
                              0.0);
                for (int i3 = 0; i3 < l; ++i3)
                    for (std::size_t j = 0; j < n1; ++j)
                        for (int i1 = 0; i1 < l; ++i1)
                            for (int i2 = 0; i2 < l; ++i2)
                                out.nu[idx3(i3, i1, i2)] +=
                                    g00[static_cast<std::size_t>(i3)] *
                                    w[static_cast<std::size_t>(i3)][j] *
                                    gibbs(node.leaves[j], i3, i1, i2);
                if (fam.kind == FamilyId::Kind::g21) {
                    out.value = contract_pair(out.nu);
                    out.nu.clear();
                } else {
                    out.branched = false;
                }
                return out;
            }
        }
        return out;
    }

    GEval node(const TreeNode& nd, int level) const {
        if (level == 2) return level2(nd);
        Vec lzs(nd.children.size());
        for (std::size_t j = 0; j < nd.children.size(); ++j) lzs[j] = nd.children[j].log_zeta;
        const WeightVector w = phi_uk_weights(lzs, sched.m_ratio(level - 1));
        GEval out;
        bool first = true;
        for (std::size_t j = 0; j < nd.children.size(); ++j) {
            GEval child = node(nd.children[j], level - 1);
            if (first) {
                out.branched = child.branched;
                if (!child.branched) out.nu.assign(child.nu.size(), 0.0);
                first = false;
            }
            if (child.branched)
                out.value += w.weights[j] * child.value;
            else
                for (std::size_t i = 0; i < child.nu.size(); ++i)
                    out.nu[i] += w.weights[j] * child.nu[i];
        }
        if (!out.branched && fam.kind == FamilyId::Kind::gk && fam.k1 == level) {
            out.value = contract_pair(out.nu);
            out.nu.clear();
            out.branched = true;
        }
        return out;
    }
};

} // namespace detail

// Self-normalized plug-in estimate of <observable> under the named gamma
// family, on a materialized sample tree.
inline GammaAverage gamma_average(const SampleTree& tree, const ConfigurationSets& sets,
                                  const Schedule& sched, FamilyId family, const Observable& obs) {
    family.check_for_level(sched.r());
    detail::GammaWalk walk{sets, sched, family, obs, sets.set_size()};
    Vec per_outer(tree.outer.size());
    for (std::size_t o = 0; o < tree.outer.size(); ++o) {
        detail::GEval ev = walk.node(tree.outer[o], sched.r() + 1);
        if (!ev.branched)
            throw ValidationError("gamma_average: family never branched; bad k1");
        per_outer[o] = ev.value;
    }
    const MeanAndSe ms = mean_and_se(per_outer);
    return {family, ms.value, ms.se, sched.r()};
}

// All families defined at level r.
inline std::vector<FamilyId> all_families(int r) {
    std::vector<FamilyId> fams = {FamilyId::g00(), FamilyId::g01(), FamilyId::g02(),
                                  FamilyId::g1(),  FamilyId::g21(), FamilyId::g22()};
    for (int k1 = 3; k1 <= r + 1; ++k1) fams.push_back(FamilyId::gamma_k(k1));
    return fams;
}

struct AuditRow {
    FamilyId family;
    double deviation = 0.0;
};

struct AuditReport {
    std::vector<AuditRow> rows;
    Vec min_ess_per_level; // [k-1] = smallest effective sample size among
                           // the Phi_{U_k} weight vectors in the tree
    double max_deviation = 0.0;
};

namespace detail {

inline void collect_ess(const TreeNode& nd, int level, const Schedule& sched, Vec& min_ess) {
    if (level == 2) {
        const auto l = static_cast<std::size_t>(nd.leaves.front().l);
        Vec lz(nd.leaves.size());
        for (std::size_t b3 = 0; b3 < l; ++b3) {
            for (std::size_t j = 0; j < nd.leaves.size(); ++j) lz[j] = nd.leaves[j].log_z[b3];
            const WeightVector w = phi_u1_weights(lz, sched.m(1));
            min_ess[0] = std::min(min_ess[0], effective_sample_size(w.weights));
        }
        return;
    }
    Vec lzs(nd.children.size());
    for (std::size_t j = 0; j < nd.children.size(); ++j) lzs[j] = nd.children[j].log_zeta;
    const WeightVector w = phi_uk_weights(lzs, sched.m_ratio(level - 1));
    min_ess[static_cast<std::size_t>(level) - 2] =
        std::min(min_ess[static_cast<std::size_t>(level) - 2], effective_sample_size(w.weights));
    for (const TreeNode& c : nd.children) collect_ess(c, level - 1, sched, min_ess);
}

} // namespace detail

// Measure-validity audit: averaging the constant 1 must return 1 for every
// family; reports |sum - 1| per family and weight degeneracy per level.
inline AuditReport normalization_audit(const SampleTree& tree, const ConfigurationSets& sets,
                                       const Schedule& sched,
                                       const std::vector<FamilyId>& families) {
    AuditReport rep;
    const Observable one = [](const IndexTuple&) { return 1.0; };
    for (const FamilyId& f : families) {
        const GammaAverage g = gamma_average(tree, sets, sched, f, one);
        rep.rows.push_back({f, std::abs(g.value - 1.0)});
        rep.max_deviation = std::max(rep.max_deviation, rep.rows.back().deviation);
    }
    rep.min_ess_per_level.assign(static_cast<std::size_t>(sched.r()),
                                 std::numeric_limits<double>::infinity());
    for (const TreeNode& root : tree.outer)
        detail::collect_ess(root, sched.r() + 1, sched, rep.min_ess_per_level);
    return rep;
}

} // namespace blirp
