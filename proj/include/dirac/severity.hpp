#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirac {

struct Knot {
    double t;
    double w;
};

/// Piecewise-linear map from severity t in [0,1] to an operator parameter w.
/// Knots have strictly increasing t, non-decreasing w, and include t = 0 and
/// t = 1.
class SeveritySchedule {
public:
    explicit SeveritySchedule(std::vector<Knot> knots) : knots_(std::move(knots)) {
        if (knots_.size() < 2) throw std::invalid_argument("schedule: need at least two knots");
        if (knots_.front().t != 0.0 || knots_.back().t != 1.0) {
            throw std::invalid_argument("schedule: knots must start at t = 0 and end at t = 1");
        }
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            if (!std::isfinite(knots_[i].t) || !std::isfinite(knots_[i].w)) {
                throw std::invalid_argument("schedule: non-finite knot");
            }
            if (i > 0 && !(knots_[i].t > knots_[i - 1].t)) {
                throw std::invalid_argument("schedule: knot severities must be strictly increasing");
            }
            if (i > 0 && knots_[i].w < knots_[i - 1].w) {
                throw std::invalid_argument("schedule: knot parameters must be non-decreasing");
            }
        }
    }

    static SeveritySchedule linear(double w_min, double w_max) { return SeveritySchedule({{0.0, w_min}, {1.0, w_max}}); }

    const std::vector<Knot>& knots() const { return knots_; }
    double w_min() const { return knots_.front().w; }
    double w_max() const { return knots_.back().w; }

    double interpolate(double t) const {
        if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("schedule: severity " + std::to_string(t) + " outside [0,1]");
        std::size_t hi = 1;
        while (hi + 1 < knots_.size() && knots_[hi].t < t) ++hi;
        const Knot& a = knots_[hi - 1];
        const Knot& b = knots_[hi];
        if (t == a.t) return a.w;
        if (t == b.t) return b.w;
        const double u = (t - a.t) / (b.t - a.t);
        return a.w + u * (b.w - a.w);
    }

    /// Same knot severities with every parameter multiplied by `factor`.
    SeveritySchedule scaled(double factor) const {
        if (!(factor > 0.0)) throw std::invalid_argument("schedule: scale factor must be positive");
        auto k = knots_;
        for (auto& knot : k) knot.w *= factor;
        return SeveritySchedule(std::move(k));
    }

private:
    std::vector<Knot> knots_;
};

}  // namespace dirac
