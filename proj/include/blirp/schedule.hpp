#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "blirp/errors.hpp"

namespace blirp {

// Parameter bundle for one lifting interpolation: number of levels r,
// exponent ladder m = [m_0..m_{r+1}], overlap schedules p and q of the same
// length, inverse temperature beta, inner group exponent s, and the outer
// group exponent (scalar power applied to the i3 sum).
struct LiftingSchedule {
    int r = 1;
    std::vector<double> m_schedule;
    std::vector<double> p_schedule;
    std::vector<double> q_schedule;
    double beta = 1.0;
    double s = -1.0;
    double group_exponent = 1.0;
};

// Per-level variances of the Gaussian triple U_k = (u4_k, u2_k, h_k),
// k = 1..r+1: (p_{k-1} q_{k-1} - p_k q_k, p_{k-1} - p_k, q_{k-1} - q_k).
struct LevelVariance {
    double u4 = 0.0;
    double u2 = 0.0;
    double h = 0.0;
    bool degenerate() const { return u4 == 0.0 && u2 == 0.0 && h == 0.0; }
};

namespace detail {

inline void check_chain(const std::vector<double>& v, const char* name, int r) {
    if (v.size() != static_cast<std::size_t>(r) + 2) {
        std::ostringstream os;
        os << name << " must have r+2 = " << (r + 2) << " entries, got " << v.size();
        throw ValidationError(os.str());
    }
    if (v.front() > 1.0 || v.front() < 0.0)
        throw ValidationError(std::string(name) + " leading entry must lie in [0,1]");
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k] > v[k - 1]) {
            std::ostringstream os;
            os << name << " not nonincreasing at index " << k;
            throw ValidationError(os.str());
        }
    }
    if (v.back() != 0.0)
        throw ValidationError(std::string(name) + " must end with 0");
    for (double x : v)
        if (!(x >= 0.0)) throw ValidationError(std::string(name) + " entries must be nonnegative");
}

} // namespace detail

// A schedule that passed validation, with the per-level variance triples
// cached. Immutable; safe to share across workers.
class Schedule {
public:
    static Schedule validate(const LiftingSchedule& c) {
        if (c.r < 1) throw ValidationError("r must be a positive integer");
        if (!(c.beta >= 0.0)) throw ValidationError("beta must be nonnegative");
        if (c.s == 0.0 || !std::isfinite(c.s)) throw ValidationError("s must be a nonzero real");
        if (!(c.group_exponent > 0.0)) throw ValidationError("group_exponent must be positive");

        if (c.m_schedule.size() != static_cast<std::size_t>(c.r) + 2) {
            std::ostringstream os;
            os << "mSchedule must have r+2 = " << (c.r + 2) << " entries, got " << c.m_schedule.size();
            throw ValidationError(os.str());
        }
        if (c.m_schedule.front() != 1.0) throw ValidationError("mSchedule must start with m_0 = 1");
        if (c.m_schedule.back() != 0.0) throw ValidationError("mSchedule must end with m_{r+1} = 0");
        // Interior exponents are kept in (0,1] and nonincreasing so every
        // ratio m_k / m_{k-1} lies in (0,1] and stays real under fractional
        // powers of positive quantities.
        for (int k = 1; k <= c.r; ++k) {
            double mk = c.m_schedule[static_cast<std::size_t>(k)];
            if (!(mk > 0.0) || mk > 1.0) {
                std::ostringstream os;
                os << "mSchedule interior entry at index " << k << " must lie in (0,1]";
                throw ValidationError(os.str());
            }
            if (mk > c.m_schedule[static_cast<std::size_t>(k) - 1]) {
                std::ostringstream os;
                os << "mSchedule not nonincreasing at index " << k;
                throw ValidationError(os.str());
            }
        }
        detail::check_chain(c.p_schedule, "pSchedule", c.r);
        detail::check_chain(c.q_schedule, "qSchedule", c.r);

        Schedule s;
        s.params_ = c;
        s.variances_.resize(static_cast<std::size_t>(c.r) + 1);
        for (int k = 1; k <= c.r + 1; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            LevelVariance& v = s.variances_[kk - 1];
            v.u4 = c.p_schedule[kk - 1] * c.q_schedule[kk - 1] - c.p_schedule[kk] * c.q_schedule[kk];
            v.u2 = c.p_schedule[kk - 1] - c.p_schedule[kk];
            v.h = c.q_schedule[kk - 1] - c.q_schedule[kk];
        }
        return s;
    }

    const LiftingSchedule& params() const { return params_; }
    int r() const { return params_.r; }
    double beta() const { return params_.beta; }
    double s() const { return params_.s; }
    double group_exponent() const { return params_.group_exponent; }
    double m(int k) const { return params_.m_schedule[static_cast<std::size_t>(k)]; }
    double p(int k) const { return params_.p_schedule[static_cast<std::size_t>(k)]; }
    double q(int k) const { return params_.q_schedule[static_cast<std::size_t>(k)]; }

    // Exponent ratio m_k / m_{k-1} used by the ladder recursion, k = 1..r.
    double m_ratio(int k) const { return m(k) / m(k - 1); }

    // Variance triple of U_k, k = 1..r+1.
    const LevelVariance& level_variance(int k) const {
        return variances_[static_cast<std::size_t>(k) - 1];
    }

    std::map<std::string, std::string> to_record() const;

private:
    Schedule() = default;
    LiftingSchedule params_;
    std::vector<LevelVariance> variances_;
};

inline Schedule validate_schedule(const LiftingSchedule& candidate) {
    return Schedule::validate(candidate);
}

// Group-exponent selector of the derivative's phi sum: 1 at the first
// level, the outer group exponent everywhere else.
inline double omega(int k1, double group_exponent) {
    if (k1 < 1) throw ValidationError("omega: level index must be >= 1");
    return k1 == 1 ? 1.0 : group_exponent;
}

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << v[i];
    }
    return os.str();
}

} // namespace detail

inline std::map<std::string, std::string> Schedule::to_record() const {
    std::ostringstream beta_s, s_s, p_s, r_s;
    beta_s.precision(17); s_s.precision(17); p_s.precision(17);
    beta_s << params_.beta; s_s << params_.s; p_s << params_.group_exponent;
    r_s << params_.r;
    return {
        {"r", r_s.str()},
        {"m_schedule", detail::join_doubles(params_.m_schedule)},
        {"p_schedule", detail::join_doubles(params_.p_schedule)},
        {"q_schedule", detail::join_doubles(params_.q_schedule)},
        {"beta", beta_s.str()},
        {"s", s_s.str()},
        {"group_exponent", p_s.str()},
    };
}

} // namespace blirp
