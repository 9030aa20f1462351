#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "blirp/engine.hpp"
#include "blirp/ensemble.hpp"
#include "blirp/errors.hpp"
#include "blirp/logspace.hpp"
#include "blirp/partition.hpp"
#include "blirp/schedule.hpp"
#include "blirp/sets.hpp"

namespace blirp {

// Monte Carlo estimate of psi(t): outer-sample mean of
// log(zeta_r) / (p |s| sqrt(n) m_r) over independent (G, U_{r+1}) draws.
inline MeanAndSe psi_estimate(const ConfigurationSets& sets, const Schedule& sched, double t,
                              const McPlan& plan, int threads = 1) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("psi_estimate: t must lie in [0,1]");
    const ChannelRequest ch{t, false};
    EngineResult res = run_engine(sets, sched, {&ch, 1}, plan, threads);
    return mean_and_se(res.psi[0]);
}

// ---------------------------------------------------------------------------
// Materialized sample tree: the full nested structure for modest budgets,
// with a partition table per U_1 leaf. The measures module estimates gamma
// averages directly on this structure.
// ---------------------------------------------------------------------------

struct TreeNode {
    // Exactly one of `children` (levels >= 2 below this node) or `leaves`
    // (this is a level-2 node) is populated.
    std::vector<TreeNode> children;
    std::vector<PartitionTable> leaves;
    double log_zeta = 0.0; // log zeta_{level-1} at this node
};

struct SampleTree {
    std::vector<TreeNode> outer; // one root (level r+1) per outer sample
    double t = 0.0;
    McPlan plan;
    int r = 1;
};

namespace detail {

inline void tree_node_ladder(TreeNode& node, const Schedule& sched, int level) {
    const double gp = sched.group_exponent();
    const double m1 = sched.m(1);
    if (level == 2) {
        const auto l = static_cast<std::size_t>(node.leaves.front().l);
        Vec scaled(node.leaves.size());
        Vec per_i3(l);
        for (std::size_t b3 = 0; b3 < l; ++b3) {
            for (std::size_t j = 0; j < node.leaves.size(); ++j)
                scaled[j] = m1 * node.leaves[j].log_z[b3];
            per_i3[b3] = gp * log_mean_exp(scaled);
        }
        node.log_zeta = log_sum_exp(per_i3);
        return;
    }
    Vec scaled(node.children.size());
    const double ratio = sched.m_ratio(level - 1);
    for (std::size_t j = 0; j < node.children.size(); ++j) {
        tree_node_ladder(node.children[j], sched, level - 1);
        scaled[j] = ratio * node.children[j].log_zeta;
    }
    node.log_zeta = log_mean_exp(scaled);
}

inline TreeNode build_tree_node(const ConfigurationSets& sets, const Schedule& sched, double t,
                                const McPlan& plan, long outer, int level, std::uint64_t flat,
                                const Mat& bilinear, const LevelSums& acc_above) {
    TreeNode node;
    const auto n_child = static_cast<std::uint64_t>(
        plan.per_level[static_cast<std::size_t>(level) - 2]);
    for (std::uint64_t j = 0; j < n_child; ++j) {
        const std::uint64_t child_flat = flat * n_child + j;
        UTriple u = draw_level(sets.dims(), sched, plan, outer, level - 1, child_flat);
        LevelSums acc = acc_above;
        acc.u4 += u.u4;
        for (int i = 0; i < sets.set_size(); ++i) {
            acc.y_dot_u2[static_cast<std::size_t>(i)] +=
                dot(sets.y_set()[static_cast<std::size_t>(i)], u.u2);
            acc.x_dot_h[static_cast<std::size_t>(i)] +=
                dot(u.h, sets.x_set()[static_cast<std::size_t>(i)]);
        }
        if (level == 2) {
            PartitionTable table;
            fill_partition(sets, sched, t, field_parts(sets, bilinear, acc), table);
            node.leaves.push_back(std::move(table));
        } else {
            node.children.push_back(
                build_tree_node(sets, sched, t, plan, outer, level - 1, child_flat, bilinear, acc));
        }
    }
    return node;
}

} // namespace detail

// Materialize the sampling tree at one t. Intended for modest budgets; the
// streaming engine covers large ones.
inline SampleTree build_sample_tree(const ConfigurationSets& sets, const Schedule& sched, double t,
                                    const McPlan& plan) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("build_sample_tree: t must lie in [0,1]");
    sets.dims().check();
    plan.check(sched.r());
    sets.check_support();
    SampleTree tree;
    tree.t = t;
    tree.plan = plan;
    tree.r = sched.r();
    for (long o = 0; o < plan.outer_samples; ++o) {
        const Mat g = draw_g(sets.dims(), plan, o);
        const Mat bil = detail::bilinear_table(sets, g);
        UTriple top = draw_level(sets.dims(), sched, plan, o, sched.r() + 1, 0);
        detail::LevelSums acc;
        acc.u4 = top.u4;
        acc.y_dot_u2.resize(static_cast<std::size_t>(sets.set_size()));
        acc.x_dot_h.resize(static_cast<std::size_t>(sets.set_size()));
        for (int i = 0; i < sets.set_size(); ++i) {
            acc.y_dot_u2[static_cast<std::size_t>(i)] =
                dot(sets.y_set()[static_cast<std::size_t>(i)], top.u2);
            acc.x_dot_h[static_cast<std::size_t>(i)] =
                dot(top.h, sets.x_set()[static_cast<std::size_t>(i)]);
        }
        TreeNode root =
            detail::build_tree_node(sets, sched, t, plan, o, sched.r() + 1, 0, bil, acc);
        detail::tree_node_ladder(root, sched, sched.r() + 1);
        tree.outer.push_back(std::move(root));
    }
    return tree;
}

// psi per outer sample read off a materialized tree.
inline Vec tree_psi_per_outer(const SampleTree& tree, const ConfigurationSets& sets,
                              const Schedule& sched) {
    const double norm = 1.0 / (sched.group_exponent() * std::abs(sched.s()) *
                               std::sqrt(static_cast<double>(sets.x_dim())) * sched.m(sched.r()));
    Vec out(tree.outer.size());
    for (std::size_t o = 0; o < tree.outer.size(); ++o) out[o] = tree.outer[o].log_zeta * norm;
    return out;
}

// ---------------------------------------------------------------------------
// The zeta ladder as a standalone operation on an explicit tree of log Z
// samples (one vector of per-anchor log Z values per U_1 draw).
// ---------------------------------------------------------------------------

struct ZetaSampleNode {
    std::vector<ZetaSampleNode> children;  // populated for levels >= 3
    std::vector<Vec> leaf_log_z;           // populated at level-2 nodes
};

struct ZetaLadder {
    // values[k-1]: log zeta_k at every level-(k+1) node, in traversal order.
    std::vector<Vec> values;
    std::vector<long> sample_counts; // sample_counts[k-1] = U_k draws per node
    double top() const { return values.back().front(); }
};

namespace detail {

inline double zeta_recurse(const ZetaSampleNode& node, const Schedule& sched, int level,
                           ZetaLadder& out) {
    if (level == 2) {
        if (!node.children.empty())
            throw ValidationError("zeta_ladder: tree deeper than the schedule depth r");
        if (node.leaf_log_z.empty()) throw NumericalError("zeta_ladder: zero samples at level 1");
        const std::size_t l = node.leaf_log_z.front().size();
        Vec scaled(node.leaf_log_z.size());
        Vec per_i3(l);
        for (std::size_t b3 = 0; b3 < l; ++b3) {
            for (std::size_t j = 0; j < node.leaf_log_z.size(); ++j) {
                if (node.leaf_log_z[j].size() != l)
                    throw ValidationError("zeta_ladder: ragged per-anchor log Z samples");
                scaled[j] = sched.m(1) * node.leaf_log_z[j][b3];
            }
            per_i3[b3] = sched.group_exponent() * log_mean_exp(scaled);
        }
        const double lz1 = log_sum_exp(per_i3);
        out.values[0].push_back(lz1);
        out.sample_counts[0] = static_cast<long>(node.leaf_log_z.size());
        return lz1;
    }
    if (node.children.empty())
        throw NumericalError("zeta_ladder: zero samples at level " + std::to_string(level - 1));
    Vec scaled(node.children.size());
    const double ratio = sched.m_ratio(level - 1);
    for (std::size_t j = 0; j < node.children.size(); ++j)
        scaled[j] = ratio * zeta_recurse(node.children[j], sched, level - 1, out);
    const double lz = log_mean_exp(scaled);
    out.values[static_cast<std::size_t>(level) - 2].push_back(lz);
    out.sample_counts[static_cast<std::size_t>(level) - 2] = static_cast<long>(node.children.size());
    return lz;
}

} // namespace detail

// Accumulate log zeta_k, k = 1..r, over an explicit sample tree of depth r.
inline ZetaLadder zeta_ladder(const ZetaSampleNode& root, const Schedule& sched) {
    ZetaLadder out;
    out.values.resize(static_cast<std::size_t>(sched.r()));
    out.sample_counts.assign(static_cast<std::size_t>(sched.r()), 0);
    detail::zeta_recurse(root, sched, sched.r() + 1, out);
    return out;
}

} // namespace blirp
