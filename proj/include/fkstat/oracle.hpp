#pragma once

#include <cmath>
#include <vector>

#include "fkstat/errors.hpp"
#include "fkstat/linalg.hpp"
#include "fkstat/model.hpp"

namespace fkstat {

// Exact unnormalized/normalized flows of a finite-state model at time t.
struct OracleResult {
    std::vector<double> gamma_vector;  // per-state unnormalized mass
    double gamma_mass = 0.0;           // gamma_t(1)
    std::vector<double> eta_vector;    // gamma_vector / gamma_mass
};

namespace detail {

inline Matrix weighted_generator(const Matrix& rates, const std::vector<double>& potential) {
    Matrix a = rates;
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) -= potential[i];
    return a;
}

}  // namespace detail

// Row-vector propagation of eta_0 through the Feynman-Kac semigroup: on each
// interval where the potential table is constant the weighted generator
// G - diag(V) is time-constant, so the exact propagator is its matrix
// exponential. Piecewise-constant potentials are handled by interval products.
inline OracleResult exact_flow(const FiniteStateModel& model, double t) {
    if (t < 0.0) throw DomainError("exact_flow: negative time");
    OracleResult out;
    std::vector<double> mass = model.initial_law();
    const auto& grid = model.potential_grid();
    double cursor = 0.0;
    for (std::size_t i = 0; i < grid.breakpoints.size() && cursor < t; ++i) {
        const double seg_end = (i + 1 < grid.breakpoints.size())
                                   ? std::min(grid.breakpoints[i + 1], t)
                                   : t;
        if (seg_end <= cursor) continue;
        const Matrix a = detail::weighted_generator(model.rate_matrix(), grid.tables[i]);
        mass = expm(a.scaled(seg_end - cursor)).apply_transposed(mass);
        cursor = seg_end;
    }
    out.gamma_vector = mass;
    out.gamma_mass = 0.0;
    for (double m : mass) out.gamma_mass += m;
    if (!(out.gamma_mass > 0.0))
        throw InvariantViolation("exact_flow: gamma_t(1) is not positive");
    out.eta_vector.resize(mass.size());
    for (std::size_t i = 0; i < mass.size(); ++i) out.eta_vector[i] = mass[i] / out.gamma_mass;
    return out;
}

inline double exact_gamma(const FiniteStateModel& model, double t, const std::vector<double>& f) {
    const OracleResult flow = exact_flow(model, t);
    if (f.size() != flow.gamma_vector.size()) throw DomainError("exact_gamma: f size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += flow.gamma_vector[i] * f[i];
    return s;
}

inline double exact_eta(const FiniteStateModel& model, double t, const std::vector<double>& f) {
    const OracleResult flow = exact_flow(model, t);
    if (f.size() != flow.eta_vector.size()) throw DomainError("exact_eta: f size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += flow.eta_vector[i] * f[i];
    return s;
}

// f - eta_t(f), as a per-state table.
inline std::vector<double> centered_table(const FiniteStateModel& model, double t,
                                          std::vector<double> f) {
    const double mean = exact_eta(model, t, f);
    for (double& x : f) x -= mean;
    return f;
}

// Centered and scaled so that eta_t(f^2) = 1.
inline std::vector<double> normalized_table(const FiniteStateModel& model, double t,
                                            std::vector<double> f) {
    f = centered_table(model, t, std::move(f));
    std::vector<double> f2(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) f2[i] = f[i] * f[i];
    const double var = exact_eta(model, t, f2);
    if (var <= 0.0) throw DomainError("normalized_table: function is eta_t-a.s. constant");
    for (double& x : f) x /= std::sqrt(var);
    return f;
}

}  // namespace fkstat
