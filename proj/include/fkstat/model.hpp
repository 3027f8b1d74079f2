#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fkstat/errors.hpp"
#include "fkstat/linalg.hpp"
#include "fkstat/rng.hpp"

namespace fkstat {

// A model a particle system can be driven by: Markov dynamics plus a bounded
// nonnegative potential. Immutable after construction; all randomness flows
// through the caller's engine.
template <class M>
concept ParticleModel = requires(const M& m, const typename M::State& x, double t, double dt,
                                 RngEngine& rng) {
    typename M::State;
    { m.potential(t, x) } -> std::convertible_to<double>;
    { m.potential_bound() } -> std::convertible_to<double>;
    { m.sample_initial(rng) } -> std::convertible_to<typename M::State>;
    { m.step(t, x, dt, rng) } -> std::convertible_to<typename M::State>;
};

// Piecewise-constant-in-time per-state potential. breakpoints[0] must be 0;
// tables[i] applies on [breakpoints[i], breakpoints[i+1]) and the last table
// extends to +inf.
struct PiecewisePotential {
    std::vector<double> breakpoints{0.0};
    std::vector<std::vector<double>> tables;

    const std::vector<double>& table_at(double t) const {
        std::size_t i = 0;
        while (i + 1 < breakpoints.size() && t >= breakpoints[i + 1]) ++i;
        return tables[i];
    }
};

// Continuous-time Markov chain on {0,...,n-1} with a per-state potential.
class FiniteStateModel {
public:
    using State = int;

    FiniteStateModel(Matrix rate_matrix, std::vector<double> potential_table,
                     double potential_bound, std::vector<double> initial_law)
        : FiniteStateModel(std::move(rate_matrix),
                           PiecewisePotential{{0.0}, {std::move(potential_table)}},
                           potential_bound, std::move(initial_law)) {}

    FiniteStateModel(Matrix rate_matrix, PiecewisePotential potential, double potential_bound,
                     std::vector<double> initial_law)
        : rates_(std::move(rate_matrix)),
          potential_(std::move(potential)),
          bound_(potential_bound),
          initial_(std::move(initial_law)) {
        const std::size_t n = rates_.rows();
        if (n == 0 || rates_.cols() != n) throw DomainError("rate matrix must be square and nonempty");
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row += rates_(i, j);
                if (i != j && rates_(i, j) < 0.0)
                    throw InvariantViolation("rate matrix: negative off-diagonal entry");
            }
            if (std::fabs(row) > 1e-9) throw InvariantViolation("rate matrix: row does not sum to 0");
        }
        if (bound_ <= 0.0) throw DomainError("potential bound must be positive");
        if (potential_.breakpoints.empty() || potential_.breakpoints.front() != 0.0)
            throw DomainError("potential time grid must start at 0");
        if (potential_.tables.size() != potential_.breakpoints.size())
            throw DomainError("potential time grid and tables disagree");
        for (const auto& tab : potential_.tables) {
            if (tab.size() != n) throw DomainError("potential table size != state count");
            for (double v : tab)
                if (v < 0.0 || v > bound_)
                    throw InvariantViolation("potential table entry outside [0, V_inf]");
        }
        if (initial_.size() != n) throw DomainError("initial law size != state count");
        double mass = 0.0;
        for (double p : initial_) {
            if (p < 0.0) throw InvariantViolation("initial law: negative probability");
            mass += p;
        }
        if (std::fabs(mass - 1.0) > 1e-12) throw InvariantViolation("initial law does not sum to 1");
    }

    int state_count() const { return static_cast<int>(rates_.rows()); }
    const Matrix& rate_matrix() const { return rates_; }
    const PiecewisePotential& potential_grid() const { return potential_; }
    const std::vector<double>& initial_law() const { return initial_; }

    double potential(double t, State x) const {
        const double v = potential_.table_at(t)[static_cast<std::size_t>(x)];
        if (v < 0.0 || v > bound_) throw InvariantViolation("potential evaluation outside [0, V_inf]");
        return v;
    }

    double potential_bound() const { return bound_; }

    State sample_initial(RngEngine& rng) const {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double u = unif(rng), acc = 0.0;
        for (std::size_t i = 0; i < initial_.size(); ++i) {
            acc += initial_[i];
            if (u <= acc) return static_cast<State>(i);
        }
        return static_cast<State>(initial_.size() - 1);
    }

    // Exact jump-chain evolution over a window of length dt: sample
    // exponential holding times and jump while they fit.
    State step(double /*t*/, State x, double dt, RngEngine& rng) const {
        if (dt <= 0.0) throw DomainError("step: dt must be positive");
        double remaining = dt;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        while (true) {
            const double rate = -rates_(x, x);
            if (rate <= 0.0) return x;
            std::exponential_distribution<double> hold(rate);
            const double wait = hold(rng);
            if (wait > remaining) return x;
            remaining -= wait;
            double u = unif(rng) * rate, acc = 0.0;
            int next = x;
            for (int j = 0; j < state_count(); ++j) {
                if (j == x) continue;
                acc += rates_(x, j);
                if (u <= acc) { next = j; break; }
                next = j;  // fall back to the last positive-rate target
            }
            x = next;
        }
    }

private:
    Matrix rates_;
    PiecewisePotential potential_;
    double bound_;
    std::vector<double> initial_;
};

// Euclidean diffusion dX = drift dt + diffusion dW (diagonal noise),
// discretized by Euler-Maruyama. No exact flow oracle exists for these;
// they are exercised through self-consistency checks only.
class DiffusionModel {
public:
    using State = std::vector<double>;
    using VectorField = std::function<std::vector<double>(double, const State&)>;
    using Potential = std::function<double(double, const State&)>;
    using InitialSampler = std::function<State(RngEngine&)>;

    DiffusionModel(std::size_t dimension, VectorField drift, VectorField diffusion,
                   Potential potential, double potential_bound, InitialSampler initial)
        : dim_(dimension),
          drift_(std::move(drift)),
          diffusion_(std::move(diffusion)),
          potential_fn_(std::move(potential)),
          bound_(potential_bound),
          initial_(std::move(initial)) {
        if (dim_ == 0) throw DomainError("diffusion dimension must be >= 1");
        if (bound_ <= 0.0) throw DomainError("potential bound must be positive");
    }

    std::size_t dimension() const { return dim_; }

    double potential(double t, const State& x) const {
        const double v = potential_fn_(t, x);
        if (v < 0.0 || v > bound_) throw InvariantViolation("potential evaluation outside [0, V_inf]");
        return v;
    }

    double potential_bound() const { return bound_; }

    State sample_initial(RngEngine& rng) const { return initial_(rng); }

    State step(double t, const State& x, double dt, RngEngine& rng) const {
        if (dt <= 0.0) throw DomainError("step: dt must be positive");
        const auto mu = drift_(t, x);
        const auto sigma = diffusion_(t, x);
        std::normal_distribution<double> gauss(0.0, 1.0);
        State y(dim_);
        const double root_dt = std::sqrt(dt);
        for (std::size_t i = 0; i < dim_; ++i) {
            y[i] = x[i] + mu[i] * dt + sigma[i] * root_dt * gauss(rng);
            if (!std::isfinite(y[i])) throw NumericalBlowup("diffusion step produced non-finite state");
        }
        return y;
    }

private:
    std::size_t dim_;
    VectorField drift_;
    VectorField diffusion_;
    Potential potential_fn_;
    double bound_;
    InitialSampler initial_;
};

static_assert(ParticleModel<FiniteStateModel>);
static_assert(ParticleModel<DiffusionModel>);

}  // namespace fkstat
