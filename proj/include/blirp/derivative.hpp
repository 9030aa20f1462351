#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "blirp/engine.hpp"
#include "blirp/errors.hpp"
#include "blirp/logspace.hpp"
#include "blirp/schedule.hpp"
#include "blirp/sets.hpp"

// Closed-form derivative of psi(t): the weighted sum of gamma-family
// averages of bilinear overlap observables, assembled per outer sample, and
// its finite-difference oracle on common random numbers.

namespace blirp {

struct PhiTermSet {
    std::vector<MeanAndSe> phi_k; // [k1-1] for k1 = 1..r+1
    MeanAndSe phi22, phi01, phi02;
    MeanAndSe derivative; // sign(s) beta^2 / (2 sqrt(n)) * (sum phi_k + phi22 + phi01 + phi02)
};

namespace detail {

inline void check_interior_t(double t) {
    if (!(t > 0.0 && t < 1.0))
        throw ValidationError("derivative: t must lie strictly inside (0,1)");
}

inline PhiTermSet assemble_phi(const ConfigurationSets& sets, const Schedule& sched,
                               const Vec& gamma_rows, long outer, int width) {
    const int r = sched.r();
    const double s = sched.s();
    const double gp = sched.group_exponent();
    const double scale = (s > 0 ? 1.0 : -1.0) * sched.beta() * sched.beta() /
                         (2.0 * std::sqrt(static_cast<double>(sets.x_dim())));

    std::vector<double> pref_k(static_cast<std::size_t>(r) + 1);
    for (int k1 = 1; k1 <= r + 1; ++k1)
        pref_k[static_cast<std::size_t>(k1) - 1] = -s * (sched.m(k1 - 1) - sched.m(k1)) * omega(k1, gp);
    const double pref22 = s * sched.m(1) * (gp - 1.0);
    const double pref01 = (1.0 - sched.p(0)) * (1.0 - sched.q(0));
    const double pref02 = (s - 1.0) * (1.0 - sched.p(0));

    const auto n_out = static_cast<std::size_t>(outer);
    const auto w = static_cast<std::size_t>(width);
    Vec col(n_out), total(n_out, 0.0);
    PhiTermSet out;
    out.phi_k.resize(static_cast<std::size_t>(r) + 1);

    auto term = [&](std::size_t column, double pref) -> MeanAndSe {
        if (pref == 0.0) return {0.0, 0.0}; // exact vanishing, not statistical
        for (std::size_t o = 0; o < n_out; ++o) {
            col[o] = pref * gamma_rows[o * w + column];
            total[o] += col[o];
        }
        return mean_and_se(col);
    };

    for (int k1 = 1; k1 <= r + 1; ++k1)
        out.phi_k[static_cast<std::size_t>(k1) - 1] =
            term(static_cast<std::size_t>(k1) - 1, pref_k[static_cast<std::size_t>(k1) - 1]);
    out.phi22 = term(static_cast<std::size_t>(r) + 1, pref22);
    out.phi01 = term(static_cast<std::size_t>(r) + 2, pref01);
    out.phi02 = term(static_cast<std::size_t>(r) + 3, pref02);

    for (std::size_t o = 0; o < n_out; ++o) total[o] *= scale;
    out.derivative = mean_and_se(total);
    return out;
}

} // namespace detail

// All phi terms at one t, from a single streaming pass.
inline PhiTermSet phi_terms(const ConfigurationSets& sets, const Schedule& sched, double t,
                            const McPlan& plan, int threads = 1) {
    detail::check_interior_t(t);
    const ChannelRequest ch{t, true};
    EngineResult res = run_engine(sets, sched, {&ch, 1}, plan, threads);
    return detail::assemble_phi(sets, sched, res.gamma[0], plan.outer_samples, res.row_width());
}

inline MeanAndSe dpsi_dt_closed(const ConfigurationSets& sets, const Schedule& sched, double t,
                                const McPlan& plan, int threads = 1) {
    return phi_terms(sets, sched, t, plan, threads).derivative;
}

// Central difference on shared draws; the standard error comes from the
// spread of the per-outer-sample pathwise differences.
inline MeanAndSe dpsi_dt_fd(const ConfigurationSets& sets, const Schedule& sched, double t,
                            double h, const McPlan& plan, int threads = 1) {
    if (!(h > 0.0)) throw ValidationError("dpsi_dt_fd: step must be positive");
    if (!(t - h > 0.0 && t + h < 1.0))
        throw ValidationError("dpsi_dt_fd: t +- h must stay inside (0,1)");
    const ChannelRequest chs[2] = {{t - h, false}, {t + h, false}};
    EngineResult res = run_engine(sets, sched, chs, plan, threads);
    Vec d(res.psi[0].size());
    for (std::size_t o = 0; o < d.size(); ++o)
        d[o] = (res.psi[1][o] - res.psi[0][o]) / (2.0 * h);
    return mean_and_se(d);
}

struct ConsistencyRow {
    int r = 1;
    double t = 0.0, h = 0.0;
    double closed = 0.0, se_closed = 0.0;
    double fd = 0.0, se_fd = 0.0;
    double z = 0.0;
    std::uint64_t seed = 0;
    bool flagged = false; // |z| > 3
};

// Closed form vs finite differences over a t grid, one draw-shared pass.
inline std::vector<ConsistencyRow> consistency_report(const ConfigurationSets& sets,
                                                      const Schedule& sched,
                                                      const std::vector<double>& t_grid, double h,
                                                      const McPlan& plan, int threads = 1) {
    if (!(h > 0.0)) throw ValidationError("consistency_report: step must be positive");
    std::vector<ChannelRequest> chs;
    for (double t : t_grid) {
        detail::check_interior_t(t);
        if (!(t - h > 0.0 && t + h < 1.0))
            throw ValidationError("consistency_report: t +- h must stay inside (0,1)");
        chs.push_back({t, true});
        chs.push_back({t - h, false});
        chs.push_back({t + h, false});
    }
    EngineResult res = run_engine(sets, sched, chs, plan, threads);

    std::vector<ConsistencyRow> rows;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const std::size_t c = 3 * i;
        const PhiTermSet terms =
            detail::assemble_phi(sets, sched, res.gamma[c], plan.outer_samples, res.row_width());
        Vec d(res.psi[c + 1].size());
        for (std::size_t o = 0; o < d.size(); ++o)
            d[o] = (res.psi[c + 2][o] - res.psi[c + 1][o]) / (2.0 * h);
        const MeanAndSe fd = mean_and_se(d);

        ConsistencyRow row;
        row.r = sched.r();
        row.t = t_grid[i];
        row.h = h;
        row.closed = terms.derivative.value;
        row.se_closed = terms.derivative.se;
        row.fd = fd.value;
        row.se_fd = fd.se;
        const double denom = std::sqrt(row.se_closed * row.se_closed + row.se_fd * row.se_fd);
        row.z = denom > 0.0 ? (row.closed - row.fd) / denom : (row.closed == row.fd ? 0.0 : INFINITY);
        row.seed = plan.seed;
        row.flagged = std::abs(row.z) > 3.0;
        rows.push_back(row);
    }
    return rows;
}

} // namespace blirp
