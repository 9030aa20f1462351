#pragma once

#include <functional>
#include <span>
#include <vector>

#include "blirp/ensemble.hpp"
#include "blirp/errors.hpp"
#include "blirp/linalg.hpp"

namespace blirp {

// Anchor family f_xbar(x), evaluated as anchor(xbar, x). A null function is
// the identically-zero anchor.
using AnchorFn = std::function<double(std::span<const double>, std::span<const double>)>;

// The finite configuration sets (X, Xbar, Y), all of cardinality l, plus the
// anchor family and the optional per-anchor restriction of X. Construction
// caches norms and the anchor table; everything downstream reads the caches.
class ConfigurationSets {
public:
    ConfigurationSets(std::vector<Vec> x_set, std::vector<Vec> xbar_set, std::vector<Vec> y_set,
                      AnchorFn anchor = nullptr,
                      std::vector<std::vector<int>> restriction = {})
        : x_(std::move(x_set)), xbar_(std::move(xbar_set)), y_(std::move(y_set)) {
        if (x_.empty() || y_.size() != x_.size())
            throw ValidationError("configuration sets: X and Y must be nonempty and equally sized");
        if (!xbar_.empty() && xbar_.size() != x_.size())
            throw ValidationError("configuration sets: Xbar must be empty or match |X|");
        const std::size_t l = x_.size();
        const std::size_t n = x_.front().size();
        const std::size_t m = y_.front().size();
        for (const Vec& v : x_)
            if (v.size() != n) throw ValidationError("configuration sets: ragged X");
        for (const Vec& v : xbar_)
            if (v.size() != n) throw ValidationError("configuration sets: ragged Xbar");
        for (const Vec& v : y_)
            if (v.size() != m) throw ValidationError("configuration sets: ragged Y");

        x_norm_.resize(l);
        y_norm_.resize(l);
        for (std::size_t i = 0; i < l; ++i) {
            x_norm_[i] = norm2(x_[i]);
            y_norm_[i] = norm2(y_[i]);
        }

        anchor_table_ = Mat(l, l); // (i3, i1)
        if (anchor && !xbar_.empty()) {
            for (std::size_t i3 = 0; i3 < l; ++i3)
                for (std::size_t i1 = 0; i1 < l; ++i1)
                    anchor_table_(i3, i1) = anchor(xbar_[i3], x_[i1]);
        }
        anchor_ = std::move(anchor);

        allowed_ = Mat(l, l); // (i3, i1), 1 = allowed
        if (restriction.empty()) {
            for (double& v : allowed_.data) v = 1.0;
        } else {
            if (restriction.size() != l)
                throw ValidationError("configuration sets: restriction must list one subset per anchor");
            for (std::size_t i3 = 0; i3 < l; ++i3)
                for (int i1 : restriction[i3]) {
                    if (i1 < 0 || static_cast<std::size_t>(i1) >= l)
                        throw ValidationError("configuration sets: restriction index out of range");
                    allowed_(i3, static_cast<std::size_t>(i1)) = 1.0;
                }
        }
    }

    int set_size() const { return static_cast<int>(x_.size()); }
    int x_dim() const { return static_cast<int>(x_.front().size()); }
    int y_dim() const { return static_cast<int>(y_.front().size()); }
    ProblemDims dims() const { return {x_dim(), y_dim(), set_size()}; }

    const std::vector<Vec>& x_set() const { return x_; }
    const std::vector<Vec>& xbar_set() const { return xbar_; }
    const std::vector<Vec>& y_set() const { return y_; }
    double x_norm(int i) const { return x_norm_[static_cast<std::size_t>(i)]; }
    double y_norm(int i) const { return y_norm_[static_cast<std::size_t>(i)]; }

    // f_{xbar(i3)}(x(i1)); zero when no anchor was supplied.
    double anchor_value(int i3, int i1) const {
        return anchor_table_(static_cast<std::size_t>(i3), static_cast<std::size_t>(i1));
    }
    bool allowed(int i3, int i1) const {
        return allowed_(static_cast<std::size_t>(i3), static_cast<std::size_t>(i1)) != 0.0;
    }
    bool restricted() const {
        for (double v : allowed_.data)
            if (v == 0.0) return true;
        return false;
    }

    // Every anchor must keep at least one admissible x; a fully excluded
    // inner sum has no partition function.
    void check_support() const {
        const int l = set_size();
        for (int i3 = 0; i3 < l; ++i3) {
            bool any = false;
            for (int i1 = 0; i1 < l && !any; ++i1) any = allowed(i3, i1);
            if (!any)
                throw NumericalError("empty inner set: restriction excludes every x for anchor " +
                                     std::to_string(i3));
        }
    }

private:
    std::vector<Vec> x_, xbar_, y_;
    AnchorFn anchor_;
    Vec x_norm_, y_norm_;
    Mat anchor_table_;
    Mat allowed_;
};

} // namespace blirp
