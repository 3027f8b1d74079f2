#pragma once

#include <cmath>
#include <cstddef>

#include "fkstat/errors.hpp"

namespace fkstat {

// Point estimate with its standard error. Estimator outputs throughout the
// library use this shape so that error propagation stays explicit.
struct MeanSE {
    double value = 0.0;
    double se = 0.0;

    MeanSE() = default;
    MeanSE(double v, double s) : value(v), se(s) {}

    MeanSE operator+(const MeanSE& o) const { return {value + o.value, std::hypot(se, o.se)}; }
    MeanSE operator-(const MeanSE& o) const { return {value - o.value, std::hypot(se, o.se)}; }
    MeanSE scaled(double c) const { return {c * value, std::fabs(c) * se}; }

    // Product of independent estimates; first-order error propagation.
    MeanSE times(const MeanSE& o) const {
        return {value * o.value, std::hypot(value * o.se, o.value * se)};
    }
};

// Welford streaming mean/variance.
class RunningStats {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }

    double variance() const {  // unbiased
        if (n_ < 2) return 0.0;
        return m2_ / static_cast<double>(n_ - 1);
    }

    double stddev() const { return std::sqrt(variance()); }

    // Standard error of the mean.
    double se() const {
        if (n_ < 2) return 0.0;
        return std::sqrt(variance() / static_cast<double>(n_));
    }

    MeanSE mean_se() const { return {mean(), se()}; }

    void merge(const RunningStats& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) { *this = o; return; }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
        const double d = o.mean_ - mean_;
        mean_ += d * nb / (na + nb);
        m2_ += o.m2_ + d * d * na * nb / (na + nb);
        n_ += o.n_;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace fkstat
