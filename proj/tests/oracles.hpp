#pragma once

// Test-only oracles, independent of the implementation paths they check:
//  - Taylor-series matrix exponential (vs the Pade route in the library)
//  - quadrature evaluation of the one-ring conditional expectation
//  - plain recursive enumeration of injection/tuple sums

#include <cmath>
#include <functional>
#include <vector>

#include "fkstat/linalg.hpp"
#include "fkstat/model.hpp"
#include "fkstat/special.hpp"

namespace oracles {

// exp(A) by scaled Taylor summation: halve until norm < 0.5, sum the series
// to machine tolerance, square back.
inline fkstat::Matrix series_expm(const fkstat::Matrix& a) {
    int squarings = 0;
    fkstat::Matrix as = a;
    while (as.norm1() > 0.5) {
        as = as.scaled(0.5);
        ++squarings;
    }
    const std::size_t n = a.rows();
    fkstat::Matrix sum = fkstat::Matrix::identity(n);
    fkstat::Matrix term = fkstat::Matrix::identity(n);
    for (int k = 1; k <= 60; ++k) {
        term = (term * as).scaled(1.0 / k);
        sum = sum + term;
        if (term.norm1() < 1e-18) break;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

// gamma_t row vector via the series exponential (time-constant potential).
inline std::vector<double> series_gamma_vector(const fkstat::FiniteStateModel& model, double t) {
    fkstat::Matrix a = model.rate_matrix();
    const auto& v = model.potential_grid().tables.front();
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) -= v[i];
    return series_expm(a.scaled(t)).apply_transposed(model.initial_law());
}

// E over the two-particle auxiliary system, conditioned on exactly one ring,
// of G(x1_t, x2_t) * exp(-int (V(x1)+V(x2))): brute-force path integration.
// The single uniform ring time is integrated by Gauss-Legendre; between the
// ring the pair propagates by the tensor square of the weighted semigroup,
// and the ring applies the jump operator for a uniformly chosen ordered pair.
inline double quadrature_one_ring(const fkstat::FiniteStateModel& model, double t,
                                  const std::vector<double>& g_table, int panels = 8,
                                  int nodes_per_panel = 32) {
    const int n = model.state_count();
    const auto& v = model.potential_grid().tables.front();
    const double v_inf = model.potential_bound();

    fkstat::Matrix a = model.rate_matrix();
    for (int i = 0; i < n; ++i) a(i, i) -= v[i];

    // jump operator on the product space, averaged over the 2 ordered pairs
    fkstat::Matrix jump(static_cast<std::size_t>(n) * n, static_cast<std::size_t>(n) * n);
    for (int x1 = 0; x1 < n; ++x1)
        for (int x2 = 0; x2 < n; ++x2) {
            const std::size_t src = static_cast<std::size_t>(x1) * n + x2;
            const double p1 = v[x1] / v_inf;  // particle 1 adopts x2
            jump(src, static_cast<std::size_t>(x2) * n + x2) += 0.5 * p1;
            jump(src, src) += 0.5 * (1.0 - p1);
            const double p2 = v[x2] / v_inf;  // particle 2 adopts x1
            jump(src, static_cast<std::size_t>(x1) * n + x1) += 0.5 * p2;
            jump(src, src) += 0.5 * (1.0 - p2);
        }

    const auto& eta0 = model.initial_law();
    std::vector<double> init2(static_cast<std::size_t>(n) * n);
    for (int x1 = 0; x1 < n; ++x1)
        for (int x2 = 0; x2 < n; ++x2) init2[static_cast<std::size_t>(x1) * n + x2] = eta0[x1] * eta0[x2];

    auto kron_square = [n](const fkstat::Matrix& m) {
        fkstat::Matrix k(static_cast<std::size_t>(n) * n, static_cast<std::size_t>(n) * n);
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2)
                for (int j1 = 0; j1 < n; ++j1)
                    for (int j2 = 0; j2 < n; ++j2)
                        k(static_cast<std::size_t>(i1) * n + i2, static_cast<std::size_t>(j1) * n + j2) =
                            m(i1, j1) * m(i2, j2);
        return k;
    };

    const auto rule = fkstat::gauss_legendre(nodes_per_panel);
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = t * p / panels, hi = t * (p + 1) / panels;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double tau = 0.5 * (hi - lo) * rule.nodes[q] + 0.5 * (hi + lo);
            const double w = 0.5 * (hi - lo) * rule.weights[q];
            const fkstat::Matrix before = kron_square(series_expm(a.scaled(tau)));
            const fkstat::Matrix after = kron_square(series_expm(a.scaled(t - tau)));
            std::vector<double> mass = after.apply_transposed(
                jump.apply_transposed(before.apply_transposed(init2)));
            double val = 0.0;
            for (std::size_t i = 0; i < mass.size(); ++i) val += mass[i] * g_table[i];
            total += w * val;
        }
    }
    return total / t;  // uniform ring-time density
}

// Direct sum over injective index tuples, written independently of the
// library's enumeration helpers.
template <class State>
double injection_sum(const std::vector<State>& points,
                     const std::function<double(const std::vector<State>&)>& f, int q) {
    const int n = static_cast<int>(points.size());
    std::vector<int> idx(q, -1);
    std::vector<State> args(q);
    double total = 0.0;
    std::function<void(int)> rec = [&](int depth) {
        if (depth == q) {
            for (int i = 0; i < q; ++i) args[i] = points[idx[i]];
            total += f(args);
            return;
        }
        for (int i = 0; i < n; ++i) {
            bool used = false;
            for (int d = 0; d < depth; ++d) used = used || idx[d] == i;
            if (used) continue;
            idx[depth] = i;
            rec(depth + 1);
        }
    };
    rec(0);
    return total;
}

template <class State>
double tuple_sum(const std::vector<State>& points,
                 const std::function<double(const std::vector<State>&)>& f, int q) {
    const int n = static_cast<int>(points.size());
    std::vector<int> idx(q, 0);
    std::vector<State> args(q);
    double total = 0.0;
    while (true) {
        for (int i = 0; i < q; ++i) args[i] = points[idx[i]];
        total += f(args);
        int d = q - 1;
        while (d >= 0 && idx[d] == n - 1) idx[d--] = 0;
        if (d < 0) break;
        ++idx[d];
    }
    return total;
}

}  // namespace oracles
