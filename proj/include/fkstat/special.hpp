#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "fkstat/errors.hpp"

namespace fkstat {

inline double ln_factorial(unsigned n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double poisson_pmf(double lambda, unsigned k) {
    if (lambda < 0.0) throw DomainError("poisson_pmf: lambda < 0");
    if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(static_cast<double>(k) * std::log(lambda) - lambda - ln_factorial(k));
}

inline double normal_cdf(double x, double mean = 0.0, double variance = 1.0) {
    if (variance <= 0.0) throw DomainError("normal_cdf: variance <= 0");
    return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

// --- regularized incomplete gamma ----------------------------------------
// P(a,x) by series for x < a+1, Q(a,x) by Lentz continued fraction otherwise.

namespace detail {

inline double gamma_p_series(double a, double x) {
    double sum = 1.0 / a, term = sum, ap = a;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

inline double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw DomainError("gamma_p: bad arguments");
    if (x == 0.0) return 0.0;
    return x < a + 1.0 ? detail::gamma_p_series(a, x) : 1.0 - detail::gamma_q_cf(a, x);
}

inline double gamma_q(double a, double x) { return 1.0 - gamma_p(a, x); }

// Survival function of a chi-square with `dof` degrees of freedom.
inline double chi_square_sf(double statistic, unsigned dof) {
    if (dof == 0) throw DomainError("chi_square_sf: dof = 0");
    if (statistic <= 0.0) return 1.0;
    return gamma_q(0.5 * dof, 0.5 * statistic);
}

// P(X > k) for X ~ Poisson(lambda).
inline double poisson_tail_above(double lambda, unsigned k) {
    if (lambda == 0.0) return 0.0;
    return gamma_p(static_cast<double>(k) + 1.0, lambda);
}

// Kolmogorov asymptotic survival Q(z) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 z^2).
inline double kolmogorov_sf(double z) {
    if (z <= 0.0) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * z * z);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// --- Gauss quadrature rules -----------------------------------------------

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Nodes/weights for \int_{-1}^{1} f(x) dx.
inline QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0) throw DomainError("gauss_legendre: n = 0");
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    return r;
}

// Nodes/weights for \int f(x) e^{-x^2} dx (physicists' Hermite weight).
inline QuadratureRule gauss_hermite(std::size_t n) {
    if (n == 0) throw DomainError("gauss_hermite: n = 0");
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pim4 = 0.7511255444649425;  // pi^{-1/4}
    const std::size_t m = (n + 1) / 2;
    double x = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == 0) {
            x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            x -= 1.14 * std::pow(static_cast<double>(n), 0.426) / x;
        } else if (i == 2) {
            x = 1.86 * x - 0.86 * r.nodes[0];
        } else if (i == 3) {
            x = 1.91 * x - 0.91 * r.nodes[1];
        } else {
            x = 2.0 * x - r.nodes[i - 2];
        }
        double pp = 0.0;
        for (int it = 0; it < 200; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = x * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dx = p1 / pp;
            x -= dx;
            if (std::fabs(dx) < 1e-14) break;
        }
        r.nodes[i] = x;                 // stored descending on the first half
        r.nodes[n - 1 - i] = -x;
        r.weights[i] = 2.0 / (pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    return r;
}

}  // namespace fkstat
