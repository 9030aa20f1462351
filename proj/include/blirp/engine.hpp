#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "blirp/ensemble.hpp"
#include "blirp/errors.hpp"
#include "blirp/logspace.hpp"
#include "blirp/partition.hpp"
#include "blirp/schedule.hpp"
#include "blirp/sets.hpp"

// Streaming evaluator of the nested Monte Carlo tree behind psi(t).
//
// One outer sample draws (G, U_{r+1}); below it, level k holds
// per_level[k-1] samples of U_k per parent node. A depth-first walk computes
// per node the ladder value
//     log zeta_1  at level-2 nodes (from the U_1 leaves),
//     log zeta_k  at level-(k+1) nodes via log-mean-exp of
//                 (m_k/m_{k-1}) * log zeta_{k-1} over the children,
// and, when requested, the chained gamma-family averages needed by the
// closed-form derivative. Several t-channels share one set of draws, which
// gives common-random-number evaluation across t for free.
//
// Per-outer results land in slots indexed by outer sample, so any partition
// of outer samples across workers reproduces identical output.

namespace blirp {

struct ChannelRequest {
    double t = 0.0;
    bool phi = false; // accumulate gamma-family averages for the derivative
};

struct EngineResult {
    int r = 0;
    // psi[c][o]: per-channel, per-outer-sample value of log(zeta_r) / (p |s| sqrt(n) m_r).
    std::vector<Vec> psi;
    // gamma[c]: flat rows [outer x row_width]; row layout
    //   [ <B_0>_{gamma_1}, <B_1>_{gamma_2}, ..., <B_r>_{gamma_{r+1}},
    //     <B_1>_{gamma_22}, <x2y2>_{gamma_01}, <phi02 obs>_{gamma_02} ]
    // where B_c is the bilinear overlap observable with schedule entries (p_c, q_c).
    std::vector<Vec> gamma;

    int row_width() const { return r + 4; }
};

namespace detail {

// Linear functionals of a measure over (i1, i2) tuples; enough to rebuild
// every bilinear overlap observable between two independent tuples.
struct Moments {
    double m0 = 0.0;   // E[ ||x|| ||y|| ]
    double x2y2 = 0.0; // E[ ||x||^2 ||y||^2 ]
    Vec x;             // E[ ||y|| x ],  length n
    Vec y;             // E[ ||x|| y ],  length m
    Vec xy;            // E[ x (x) y ],  length n*m

    void resize(int n, int m) {
        x.assign(static_cast<std::size_t>(n), 0.0);
        y.assign(static_cast<std::size_t>(m), 0.0);
        xy.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(m), 0.0);
    }
    void zero() {
        m0 = x2y2 = 0.0;
        std::fill(x.begin(), x.end(), 0.0);
        std::fill(y.begin(), y.end(), 0.0);
        std::fill(xy.begin(), xy.end(), 0.0);
    }
    void axpy(double w, const Moments& o) {
        m0 += w * o.m0;
        x2y2 += w * o.x2y2;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += w * o.x[i];
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += w * o.y[i];
        for (std::size_t i = 0; i < xy.size(); ++i) xy[i] += w * o.xy[i];
    }
};

// <B_c> under the product of the measure with itself, from its moments:
// B_c = (p_c ||x||||x'|| - x'.x)(q_c ||y||||y'|| - y'.y).
inline double pair_observable(const Moments& mo, double pc, double qc) {
    return pc * qc * mo.m0 * mo.m0 - pc * dot(mo.y, mo.y) - qc * dot(mo.x, mo.x) +
           dot(mo.xy, mo.xy);
}

// Per-channel state chained up the tree for the gamma families. vk[k1] holds
// the already-contracted value of the family that branches at level k1; it is
// valid for 2 <= k1 <= (level of the node that produced the state).
struct FamilyState {
    double v1 = 0.0;  // gamma_1: product formed inside the U_1 average
    double v22 = 0.0; // gamma_22: product of two U_1 reweightings at fixed i3
    double v01 = 0.0; // gamma_01 average of ||x||^2 ||y||^2
    double v02 = 0.0; // gamma_02 average of the (1 - p_0) cross term
    Moments nu;       // chained single-tuple measure moments
    Vec vk;           // [0..r+1]; entries 2..r+1 used

    void resize(int n, int m, int r) {
        nu.resize(n, m);
        vk.assign(static_cast<std::size_t>(r) + 2, 0.0);
    }
    void zero() {
        v1 = v22 = v01 = v02 = 0.0;
        nu.zero();
        std::fill(vk.begin(), vk.end(), 0.0);
    }
    void axpy(double w, const FamilyState& o) {
        v1 += w * o.v1;
        v22 += w * o.v22;
        v01 += w * o.v01;
        v02 += w * o.v02;
        nu.axpy(w, o.nu);
        for (std::size_t i = 0; i < vk.size(); ++i) vk[i] += w * o.vk[i];
    }
};

struct NodeOut {
    double log_zeta = 0.0;
    FamilyState fam;
};

class Walker {
public:
    Walker(const ConfigurationSets& sets, const Schedule& sched,
           std::span<const ChannelRequest> channels, const McPlan& plan)
        : sets_(sets), sched_(sched), channels_(channels.begin(), channels.end()), plan_(plan),
          l_(sets.set_size()), n_(sets.x_dim()), m_(sets.y_dim()), r_(sched.r()) {
        const auto nc = channels_.size();
        const auto ll = static_cast<std::size_t>(l_);
        st_.resize(nc);
        su_.resize(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            st_[c] = std::sqrt(channels_[c].t);
            su_[c] = std::sqrt(1.0 - channels_[c].t);
        }
        acc_.resize(static_cast<std::size_t>(r_) + 1);
        for (auto& a : acc_) {
            a.y_dot_u2.assign(ll, 0.0);
            a.x_dot_h.assign(ll, 0.0);
        }
        zterms_.reserve(ll);

        const auto n1 = static_cast<std::size_t>(plan.per_level[0]);
        leaf_logz_.assign(nc, Mat(n1, ll));
        log_a_block_.assign(ll, Vec(ll));
        log_c_block_.assign(ll, 0.0);
        any_phi_ = false;
        for (const auto& ch : channels_) any_phi_ |= ch.phi;
        if (any_phi_) {
            leaf_mom_.assign(nc, {});
            leaf_v1_.assign(nc, Mat(n1, ll));
            leaf_v01_.assign(nc, Mat(n1, ll));
            leaf_v02_.assign(nc, Mat(n1, ll));
            for (auto& lm : leaf_mom_) {
                lm.resize(n1 * ll);
                for (auto& mo : lm) mo.resize(n_, m_);
            }
            mu_i3_.resize(ll);
            for (auto& mo : mu_i3_) mo.resize(n_, m_);
            cy_.assign(static_cast<std::size_t>(m_), 0.0);
        }
        // per-level aggregation scratch for levels 3..r+1
        child_logzeta_.resize(static_cast<std::size_t>(r_) + 2);
        child_w_.resize(static_cast<std::size_t>(r_) + 2);
        child_out_.resize(static_cast<std::size_t>(r_) + 2);
        scaled_.resize(static_cast<std::size_t>(r_) + 2);
        for (int k = 3; k <= r_ + 1; ++k) {
            const auto nk = static_cast<std::size_t>(plan.per_level[static_cast<std::size_t>(k) - 2]);
            auto& outs = child_out_[static_cast<std::size_t>(k)];
            outs.resize(nk, std::vector<NodeOut>(nc));
            if (any_phi_)
                for (auto& per_child : outs)
                    for (auto& o : per_child) o.fam.resize(n_, m_, r_);
            child_logzeta_[static_cast<std::size_t>(k)].assign(nk, 0.0);
            child_w_[static_cast<std::size_t>(k)].assign(nk, 0.0);
            scaled_[static_cast<std::size_t>(k)].assign(nk, 0.0);
        }
        w_leaf_.assign(n1, 0.0);
        scaled_leaf_.assign(n1, 0.0);
        log_ez_.assign(ll, 0.0);
        gamma00_.assign(ll, 0.0);
        root_out_.resize(nc);
        if (any_phi_)
            for (auto& o : root_out_) o.fam.resize(n_, m_, r_);
        psi_norm_ = 1.0 / (sched.group_exponent() * std::abs(sched.s()) *
                           std::sqrt(static_cast<double>(n_)) * sched.m(r_));
    }

    // Evaluate one outer sample; results per channel via psi_out / gamma_out.
    void eval_outer(long outer, std::span<double> psi_out, std::span<double> gamma_out) {
        if (!plan_.fix_g || !have_bilinear_) {
            const Mat g = draw_g(sets_.dims(), plan_, outer);
            bilinear_ = detail::bilinear_table(sets_, g);
            have_bilinear_ = true;
        }
        UTriple top = draw_level(sets_.dims(), sched_, plan_, outer, r_ + 1, 0);
        accumulate(acc_[0], nullptr, top);
        outer_ = outer;
        process_children(r_ + 1, 0, 0, root_out_);
        const int width = r_ + 4;
        for (std::size_t c = 0; c < channels_.size(); ++c) {
            psi_out[c] = root_out_[c].log_zeta * psi_norm_;
            if (channels_[c].phi) {
                const FamilyState& f = root_out_[c].fam;
                double* row = gamma_out.data() + static_cast<std::ptrdiff_t>(c) * width;
                row[0] = f.v1;
                for (int k1 = 2; k1 <= r_ + 1; ++k1)
                    row[k1 - 1] = f.vk[static_cast<std::size_t>(k1)];
                row[r_ + 1] = f.v22;
                row[r_ + 2] = f.v01;
                row[r_ + 3] = f.v02;
            }
        }
    }

private:
    void accumulate(LevelSums& dst, const LevelSums* src, const UTriple& u) {
        const auto ll = static_cast<std::size_t>(l_);
        if (src) {
            dst.u4 = src->u4 + u.u4;
            for (std::size_t i = 0; i < ll; ++i) {
                dst.y_dot_u2[i] = src->y_dot_u2[i] + dot(sets_.y_set()[i], u.u2);
                dst.x_dot_h[i] = src->x_dot_h[i] + dot(u.h, sets_.x_set()[i]);
            }
        } else {
            dst.u4 = u.u4;
            for (std::size_t i = 0; i < ll; ++i) {
                dst.y_dot_u2[i] = dot(sets_.y_set()[i], u.u2);
                dst.x_dot_h[i] = dot(u.h, sets_.x_set()[i]);
            }
        }
    }

    // Children of a node at level `parent_level` (>= 2); the parent's own
    // draw already sits in acc_[depth]. Writes the parent's per-channel
    // output into `out`.
    void process_children(int parent_level, std::uint64_t flat, int depth,
                          std::vector<NodeOut>& out) {
        const int child_level = parent_level - 1;
        const auto n_child =
            static_cast<std::uint64_t>(plan_.per_level[static_cast<std::size_t>(child_level) - 1]);
        if (child_level == 1) {
            for (std::uint64_t j = 0; j < n_child; ++j)
                eval_leaf(flat * n_child + j, depth + 1, static_cast<std::size_t>(j));
            aggregate_leaf_block(static_cast<std::size_t>(n_child), out);
            return;
        }
        auto& outs = child_out_[static_cast<std::size_t>(parent_level)];
        for (std::uint64_t j = 0; j < n_child; ++j) {
            const std::uint64_t child_flat = flat * n_child + j;
            UTriple u = draw_level(sets_.dims(), sched_, plan_, outer_, child_level, child_flat);
            accumulate(acc_[static_cast<std::size_t>(depth) + 1], &acc_[static_cast<std::size_t>(depth)], u);
            process_children(child_level, child_flat, depth + 1, outs[static_cast<std::size_t>(j)]);
        }
        aggregate_nodes(parent_level, static_cast<std::size_t>(n_child), outs, out);
    }

    // One U_1 draw: fill the per-channel leaf slots.
    void eval_leaf(std::uint64_t flat, int depth, std::size_t slot) {
        UTriple u = draw_level(sets_.dims(), sched_, plan_, outer_, 1, flat);
        LevelSums& acc = acc_[static_cast<std::size_t>(depth)];
        accumulate(acc, &acc_[static_cast<std::size_t>(depth) - 1], u);

        const auto ll = static_cast<std::size_t>(l_);
        const double s = sched_.s();
        const double q0 = sched_.q(0);
        for (std::size_t c = 0; c < channels_.size(); ++c) {
            const double st = st_[c], su = su_[c];
            const bool fam = channels_[c].phi;
            for (int i3 = 0; i3 < l_; ++i3) {
                const auto b3 = static_cast<std::size_t>(i3);
                // pass 1: log A rows and log C per admissible i1
                zterms_.clear();
                for (int i1 = 0; i1 < l_; ++i1) {
                    if (!sets_.allowed(i3, i1)) {
                        log_c_block_[static_cast<std::size_t>(i1)] = neg_inf;
                        continue;
                    }
                    const auto a = static_cast<std::size_t>(i1);
                    const double bx = sched_.beta() * sets_.x_norm(i1);
                    const double f = sets_.anchor_value(i3, i1);
                    Vec& row = log_a_block_[a];
                    for (int i2 = 0; i2 < l_; ++i2) {
                        const auto b = static_cast<std::size_t>(i2);
                        row[b] = bx * (st * bilinear_(b, a) +
                                       st * sets_.x_norm(i1) * sets_.y_norm(i2) * acc.u4 +
                                       su * (sets_.x_norm(i1) * acc.y_dot_u2[b] +
                                             sets_.y_norm(i2) * acc.x_dot_h[a]) +
                                       f);
                    }
                    const double lc = log_sum_exp(row);
                    log_c_block_[a] = lc;
                    zterms_.push_back(s * lc);
                }
                const double logz = log_sum_exp(zterms_);
                leaf_logz_[c](slot, b3) = logz;
                if (!fam) continue;

                // pass 2: Gibbs moments under gamma_0(.,.;i3)
                Moments& mom = leaf_mom_[c][slot * ll + b3];
                mom.zero();
                double v02 = 0.0;
                for (int i1 = 0; i1 < l_; ++i1) {
                    if (!sets_.allowed(i3, i1)) continue;
                    const auto a = static_cast<std::size_t>(i1);
                    const double spine = std::exp(s * log_c_block_[a] - logz);
                    const Vec& row = log_a_block_[a];
                    double cm0 = 0.0, cm2 = 0.0;
                    std::fill(cy_.begin(), cy_.end(), 0.0);
                    for (int i2 = 0; i2 < l_; ++i2) {
                        const auto b = static_cast<std::size_t>(i2);
                        const double cond = std::exp(row[b] - log_c_block_[a]);
                        const double yn = sets_.y_norm(i2);
                        cm0 += cond * yn;
                        cm2 += cond * yn * yn;
                        const Vec& yv = sets_.y_set()[b];
                        for (std::size_t jj = 0; jj < cy_.size(); ++jj) cy_[jj] += cond * yv[jj];
                    }
                    const double xn = sets_.x_norm(i1);
                    const Vec& xv = sets_.x_set()[a];
                    mom.m0 += spine * xn * cm0;
                    mom.x2y2 += spine * xn * xn * cm2;
                    for (std::size_t jj = 0; jj < mom.x.size(); ++jj)
                        mom.x[jj] += spine * cm0 * xv[jj];
                    for (std::size_t jj = 0; jj < mom.y.size(); ++jj)
                        mom.y[jj] += spine * xn * cy_[jj];
                    for (std::size_t ia = 0; ia < xv.size(); ++ia)
                        for (std::size_t jb = 0; jb < cy_.size(); ++jb)
                            mom.xy[ia * cy_.size() + jb] += spine * xv[ia] * cy_[jb];
                    v02 += spine * xn * xn * (q0 * cm0 * cm0 - dot(cy_, cy_));
                }
                leaf_v1_[c](slot, b3) = pair_observable(mom, sched_.p(0), q0);
                leaf_v01_[c](slot, b3) = mom.x2y2;
                leaf_v02_[c](slot, b3) = v02;
            }
        }
    }

    // Level-2 reduction: per-anchor U_1 reweighting, gamma_00 mixing, and the
    // families that branch at or below level 2.
    void aggregate_leaf_block(std::size_t n_leaves, std::vector<NodeOut>& out) {
        const auto ll = static_cast<std::size_t>(l_);
        const double m1 = sched_.m(1);
        const double gp = sched_.group_exponent();
        for (std::size_t c = 0; c < channels_.size(); ++c) {
            const Mat& lz = leaf_logz_[c];
            for (std::size_t b3 = 0; b3 < ll; ++b3) {
                for (std::size_t j = 0; j < n_leaves; ++j) scaled_leaf_[j] = m1 * lz(j, b3);
                log_ez_[b3] = log_mean_exp({scaled_leaf_.data(), n_leaves});
            }
            for (std::size_t b3 = 0; b3 < ll; ++b3) gamma00_[b3] = gp * log_ez_[b3];
            out[c].log_zeta = log_sum_exp(gamma00_);
            if (!channels_[c].phi) continue;

            softmax_from_logs(gamma00_, gamma00_); // now the gamma_00 distribution
            FamilyState& f = out[c].fam;
            f.zero();
            for (std::size_t b3 = 0; b3 < ll; ++b3) {
                for (std::size_t j = 0; j < n_leaves; ++j) scaled_leaf_[j] = m1 * lz(j, b3);
                softmax_from_logs({scaled_leaf_.data(), n_leaves}, {w_leaf_.data(), n_leaves});
                Moments& mu = mu_i3_[b3];
                mu.zero();
                double v1 = 0.0, v01 = 0.0, v02 = 0.0;
                for (std::size_t j = 0; j < n_leaves; ++j) {
                    const double w = w_leaf_[j];
                    mu.axpy(w, leaf_mom_[c][j * ll + b3]);
                    v1 += w * leaf_v1_[c](j, b3);
                    v01 += w * leaf_v01_[c](j, b3);
                    v02 += w * leaf_v02_[c](j, b3);
                }
                const double g00 = gamma00_[b3];
                f.v1 += g00 * v1;
                f.v01 += g00 * v01;
                f.v02 += g00 * v02;
                f.v22 += g00 * pair_observable(mu, sched_.p(1), sched_.q(1));
                f.nu.axpy(g00, mu);
            }
            f.vk[2] = pair_observable(f.nu, sched_.p(1), sched_.q(1));
        }
    }

    // Reduction of level-(k-1) children into their level-k parent with
    // Phi_{U_{k-1}} weights, plus the family that branches at level k.
    void aggregate_nodes(int k, std::size_t n_child,
                         const std::vector<std::vector<NodeOut>>& children,
                         std::vector<NodeOut>& out) {
        const double ratio = sched_.m_ratio(k - 1);
        auto& lzs = child_logzeta_[static_cast<std::size_t>(k)];
        auto& w = child_w_[static_cast<std::size_t>(k)];
        auto& scaled = scaled_[static_cast<std::size_t>(k)];
        for (std::size_t c = 0; c < channels_.size(); ++c) {
            for (std::size_t j = 0; j < n_child; ++j) {
                lzs[j] = children[j][c].log_zeta;
                scaled[j] = ratio * lzs[j];
            }
            out[c].log_zeta = log_mean_exp({scaled.data(), n_child});
            if (!channels_[c].phi) continue;
            softmax_from_logs({scaled.data(), n_child}, {w.data(), n_child});
            FamilyState& f = out[c].fam;
            f.zero();
            for (std::size_t j = 0; j < n_child; ++j) f.axpy(w[j], children[j][c].fam);
            f.vk[static_cast<std::size_t>(k)] =
                pair_observable(f.nu, sched_.p(k - 1), sched_.q(k - 1));
        }
    }

    const ConfigurationSets& sets_;
    const Schedule& sched_;
    std::vector<ChannelRequest> channels_;
    McPlan plan_;
    int l_, n_, m_, r_;
    bool any_phi_ = false;
    double psi_norm_ = 1.0;

    Vec st_, su_; // per-channel sqrt(t), sqrt(1-t)
    Mat bilinear_;
    bool have_bilinear_ = false;
    long outer_ = 0;

    std::vector<LevelSums> acc_;
    Vec zterms_;
    std::vector<Mat> leaf_logz_;             // [channel](leaf, i3)
    std::vector<Vec> log_a_block_;           // (i1 -> row over i2)
    Vec log_c_block_;                        // (i1)
    std::vector<std::vector<Moments>> leaf_mom_; // [channel][leaf*l + i3]
    std::vector<Mat> leaf_v1_, leaf_v01_, leaf_v02_;
    std::vector<Moments> mu_i3_;
    Vec cy_;
    std::vector<Vec> child_logzeta_, child_w_, scaled_;
    std::vector<std::vector<std::vector<NodeOut>>> child_out_; // [level][child][channel]
    Vec w_leaf_, scaled_leaf_;
    Vec log_ez_, gamma00_;
    std::vector<NodeOut> root_out_;
};

} // namespace detail

inline EngineResult run_engine(const ConfigurationSets& sets, const Schedule& sched,
                               std::span<const ChannelRequest> channels, const McPlan& plan,
                               int threads = 1) {
    sets.dims().check();
    plan.check(sched.r());
    sets.check_support();
    for (const auto& ch : channels)
        if (!(ch.t >= 0.0 && ch.t <= 1.0))
            throw ValidationError("engine: t must lie in [0,1]");
    if (channels.empty()) throw ValidationError("engine: no evaluation channels");

    const auto nc = channels.size();
    const auto outer = static_cast<std::size_t>(plan.outer_samples);
    EngineResult res;
    res.r = sched.r();
    res.psi.assign(nc, Vec(outer, 0.0));
    res.gamma.assign(nc, Vec());
    const int width = res.row_width();
    for (std::size_t c = 0; c < nc; ++c)
        if (channels[c].phi) res.gamma[c].assign(outer * static_cast<std::size_t>(width), 0.0);

    const int nw = std::max(1, threads);
    auto work = [&](std::size_t lo, std::size_t hi) {
        detail::Walker walker(sets, sched, channels, plan);
        Vec psi_slot(nc);
        Vec gamma_slot(nc * static_cast<std::size_t>(width));
        for (std::size_t o = lo; o < hi; ++o) {
            walker.eval_outer(static_cast<long>(o), psi_slot, gamma_slot);
            for (std::size_t c = 0; c < nc; ++c) {
                res.psi[c][o] = psi_slot[c];
                if (channels[c].phi)
                    for (int k = 0; k < width; ++k)
                        res.gamma[c][o * static_cast<std::size_t>(width) + static_cast<std::size_t>(k)] =
                            gamma_slot[c * static_cast<std::size_t>(width) + static_cast<std::size_t>(k)];
            }
        }
    };
    if (nw == 1 || outer < 2) {
        work(0, outer);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (outer + static_cast<std::size_t>(nw) - 1) / static_cast<std::size_t>(nw);
        for (int w = 0; w < nw; ++w) {
            const std::size_t lo = static_cast<std::size_t>(w) * chunk;
            const std::size_t hi = std::min(outer, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return res;
}

} // namespace blirp
