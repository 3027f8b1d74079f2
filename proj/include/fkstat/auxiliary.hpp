#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "fkstat/errors.hpp"
#include "fkstat/kernels.hpp"
#include "fkstat/model.hpp"
#include "fkstat/oracle.hpp"
#include "fkstat/rng.hpp"
#include "fkstat/running_stats.hpp"
#include "fkstat/special.hpp"

namespace fkstat {

struct RingRecord {
    double time = 0.0;
    int i = 0;  // ordered pair: i may adopt j's state
    int j = 0;
    bool accepted = false;
};

// One trajectory of the q-particle auxiliary system: terminal states, the
// ring log, and the exponential weight exp(-int_0^t sum_i V_s(xi^i_s) ds).
template <ParticleModel M>
struct AuxPath {
    std::vector<typename M::State> states;
    std::vector<RingRecord> ring_log;
    double weight = 1.0;
    int ring_count = 0;
};

namespace detail {

template <ParticleModel M>
double total_potential(const M& model, double t, const std::vector<typename M::State>& states) {
    double s = 0.0;
    for (const auto& x : states) s += model.potential(t, x);
    return s;
}

// Advance all q particles from `t` to `t_to` with sub-steps <= dt,
// accumulating the trapezoid integral of the summed potential.
template <ParticleModel M>
void advance_block(const M& model, std::vector<typename M::State>& states, double& t, double t_to,
                   double dt, double& running_potential, double& integral, RngEngine& rng) {
    while (t < t_to) {
        const double h = std::min(dt, t_to - t);
        for (auto& x : states) x = model.step(t, x, h, rng);
        t += h;
        const double p = total_potential(model, t, states);
        integral += 0.5 * h * (running_potential + p);
        running_potential = p;
    }
}

template <ParticleModel M>
void apply_ring(const M& model, std::vector<typename M::State>& states, RingRecord& ring,
                double& running_potential, RngEngine& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double accept_p = model.potential(ring.time, states[ring.i]) / model.potential_bound();
    ring.accepted = unif(rng) < accept_p;
    if (ring.accepted) {
        states[ring.i] = states[ring.j];
        running_potential = total_potential(model, ring.time, states);
    }
}

}  // namespace detail

// Exact conditional sampler given k rings on [0,t]: ring times are sorted
// i.i.d. uniforms and each ring's ordered pair is uniform among the q(q-1)
// pairs. Takes no particle count: the conditional law does not depend on it.
template <ParticleModel M>
AuxPath<M> sample_conditional_path(const M& model, int q, double t, int k, double dt,
                                   RngEngine& rng) {
    if (q < 1) throw DomainError("sample_conditional_path: q must be >= 1");
    if (k < 0) throw DomainError("sample_conditional_path: k must be >= 0");
    if (t <= 0.0) throw DomainError("sample_conditional_path: t must be positive");
    if (k > 0 && q < 2) throw DomainError("sample_conditional_path: no ordered pairs exist for q=1");

    AuxPath<M> path;
    path.ring_count = k;
    path.states.reserve(q);
    for (int i = 0; i < q; ++i) path.states.push_back(model.sample_initial(rng));

    std::uniform_real_distribution<double> unif_time(0.0, t);
    std::uniform_int_distribution<int> pick_i(0, q - 1);
    std::uniform_int_distribution<int> pick_other(0, q - 2);
    path.ring_log.resize(k);
    for (int r = 0; r < k; ++r) path.ring_log[r].time = unif_time(rng);
    std::sort(path.ring_log.begin(), path.ring_log.end(),
              [](const RingRecord& a, const RingRecord& b) { return a.time < b.time; });
    for (auto& ring : path.ring_log) {
        ring.i = pick_i(rng);
        const int other = pick_other(rng);
        ring.j = other >= ring.i ? other + 1 : other;
    }

    double cursor = 0.0;
    double running = detail::total_potential(model, 0.0, path.states);
    double integral = 0.0;
    for (auto& ring : path.ring_log) {
        detail::advance_block(model, path.states, cursor, ring.time, dt, running, integral, rng);
        detail::apply_ring(model, path.states, ring, running, rng);
    }
    detail::advance_block(model, path.states, cursor, t, dt, running, integral, rng);
    path.weight = std::exp(-integral);
    return path;
}

// Unconditioned auxiliary run: every ordered pair (i,j) owns an exponential
// clock of rate V_inf/N. Clocks are simulated per pair; that the merged ring
// count is Poisson(q(q-1) V_inf t / N) is a tested consequence, not an input.
template <ParticleModel M>
AuxPath<M> sample_unconditioned_path(const M& model, int q, double t, std::size_t n_notional,
                                     double dt, RngEngine& rng) {
    if (q < 1) throw DomainError("sample_unconditioned_path: q must be >= 1");
    if (n_notional == 0) throw DomainError("sample_unconditioned_path: N must be >= 1");
    if (t <= 0.0) throw DomainError("sample_unconditioned_path: t must be positive");

    AuxPath<M> path;
    path.states.reserve(q);
    for (int i = 0; i < q; ++i) path.states.push_back(model.sample_initial(rng));

    const double pair_rate = model.potential_bound() / static_cast<double>(n_notional);
    std::exponential_distribution<double> gap(pair_rate);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            if (i == j) continue;
            for (double s = gap(rng); s < t; s += gap(rng))
                path.ring_log.push_back({s, i, j, false});
        }
    std::sort(path.ring_log.begin(), path.ring_log.end(),
              [](const RingRecord& a, const RingRecord& b) { return a.time < b.time; });
    path.ring_count = static_cast<int>(path.ring_log.size());

    double cursor = 0.0;
    double running = detail::total_potential(model, 0.0, path.states);
    double integral = 0.0;
    for (auto& ring : path.ring_log) {
        detail::advance_block(model, path.states, cursor, ring.time, dt, running, integral, rng);
        detail::apply_ring(model, path.states, ring, running, rng);
    }
    detail::advance_block(model, path.states, cursor, t, dt, running, integral, rng);
    path.weight = std::exp(-integral);
    return path;
}

// E_{t,k}(F): mean of F^e over sample_count conditional paths.
template <ParticleModel M>
MeanSE estimate_Etk(const M& model, const Kernel<typename M::State>& kernel, int q, double t,
                    int k, std::size_t sample_count, double dt, RngEngine& rng) {
    if (kernel.arity() != q) throw DomainError("estimate_Etk: kernel arity != q");
    if (sample_count < 2) throw DomainError("estimate_Etk: need at least 2 samples");
    RunningStats stats;
    for (std::size_t m = 0; m < sample_count; ++m) {
        const auto path = sample_conditional_path(model, q, t, k, dt, rng);
        stats.add(kernel(path.states) * path.weight);
    }
    return stats.mean_se();
}

// E'_{t,1}(f (x) g): the two-particle system conditioned on one ring.
template <ParticleModel M>
MeanSE estimate_E1prime(const M& model, typename Kernel<typename M::State>::Factor f,
                        typename Kernel<typename M::State>::Factor g, double fg_bound, double t,
                        std::size_t sample_count, double dt, RngEngine& rng) {
    auto kernel = Kernel<typename M::State>::product({std::move(f), std::move(g)}, fg_bound);
    return estimate_Etk(model, kernel, 2, t, 1, sample_count, dt, rng);
}

template <ParticleModel M>
struct WKernelResult {
    MeanSE value;
    bool centering_ok = true;
    double centering_sigmas = 0.0;  // |eta_t(f)| in SE units, worst of f and g
};

// W_t(f (x) g) = (2 V_inf t / gamma_t(1)^2) E'_{t,1}(f (x) g), for f and g
// centered under eta_t. gamma_t(1) comes from the exact flow (finite-state
// models only); the centering precondition is spot-checked against the oracle.
inline WKernelResult<FiniteStateModel> w_kernel(const FiniteStateModel& model,
                                                const std::vector<double>& f,
                                                const std::vector<double>& g, double t,
                                                std::size_t sample_count, double dt,
                                                RngEngine& rng) {
    const OracleResult flow = exact_flow(model, t);
    WKernelResult<FiniteStateModel> out;
    double worst = 0.0;
    for (const auto* tab : {&f, &g}) {
        double mean = 0.0, var = 0.0;
        for (std::size_t s = 0; s < tab->size(); ++s) mean += flow.eta_vector[s] * (*tab)[s];
        for (std::size_t s = 0; s < tab->size(); ++s)
            var += flow.eta_vector[s] * ((*tab)[s] - mean) * ((*tab)[s] - mean);
        if (var > 0.0) worst = std::max(worst, std::fabs(mean) / std::sqrt(var));
        else if (std::fabs(mean) > 1e-12) worst = std::max(worst, 1e9);
    }
    out.centering_sigmas = worst;
    out.centering_ok = worst < 1e-9;

    double fb = 0.0, gb = 0.0;
    for (double v : f) fb = std::max(fb, std::fabs(v));
    for (double v : g) gb = std::max(gb, std::fabs(v));
    auto ftab = [f](const int& s) { return f[static_cast<std::size_t>(s)]; };
    auto gtab = [g](const int& s) { return g[static_cast<std::size_t>(s)]; };
    const MeanSE e1 = estimate_E1prime(model, ftab, gtab, fb * gb + 1e-300, t, sample_count, dt, rng);
    const double scale = 2.0 * model.potential_bound() * t / (flow.gamma_mass * flow.gamma_mass);
    out.value = e1.scaled(scale);
    return out;
}

struct MixtureResult {
    MeanSE value;
    int k_max = 0;
    double truncation_bound = 0.0;  // |tail| <= this
};

// Q^N_{t,q}(F) as the Poisson(lambda t) mixture over ring counts of E_{t,k}(F)
// with lambda = q(q-1) V_inf / N, truncated once the tail mass times the
// kernel bound drops below `tolerance`.
template <ParticleModel M>
MixtureResult q_measure_mixture(const M& model, const Kernel<typename M::State>& kernel, int q,
                                double t, std::size_t n_particles, int k_max,
                                std::size_t sample_count, double dt, RngEngine& rng,
                                double tolerance = 1e-10) {
    if (n_particles == 0) throw DomainError("q_measure_mixture: N must be >= 1");
    const double lambda_t =
        static_cast<double>(q) * (q - 1) * model.potential_bound() * t / static_cast<double>(n_particles);
    MixtureResult out;
    if (k_max < 0) {
        int k = 0;
        while (poisson_tail_above(lambda_t, k) * kernel.bound() > tolerance && k < 400) ++k;
        out.k_max = k;
    } else {
        out.k_max = k_max;
    }
    out.truncation_bound = poisson_tail_above(lambda_t, out.k_max) * kernel.bound();
    if (out.truncation_bound > tolerance)
        throw ToleranceNotMet("q_measure_mixture: K_max too small for requested tolerance");

    double value = 0.0, var = 0.0;
    for (int k = 0; k <= out.k_max; ++k) {
        const double w = poisson_pmf(lambda_t, static_cast<unsigned>(k));
        if (w == 0.0) continue;
        const MeanSE ek = estimate_Etk(model, kernel, q, t, k, sample_count, dt, rng);
        value += w * ek.value;
        var += w * w * ek.se * ek.se;
    }
    out.value = {value, std::sqrt(var)};
    return out;
}

// Closed-form derivative of the Laurent expansion:
//   d^r Q_{t,q}(F) = sum_{k=0}^r (-1)^{r-k} / (k! (r-k)!) (q(q-1) V_inf t)^r E_{t,k}(F).
template <ParticleModel M>
MeanSE derivative_formula(const M& model, const Kernel<typename M::State>& kernel, int q, double t,
                          int r, std::size_t sample_count, double dt, RngEngine& rng) {
    if (r < 0) throw DomainError("derivative_formula: r must be >= 0");
    const double base = static_cast<double>(q) * (q - 1) * model.potential_bound() * t;
    double value = 0.0, var = 0.0;
    for (int k = 0; k <= r; ++k) {
        double coef = std::pow(base, r);
        for (int i = 2; i <= k; ++i) coef /= i;
        for (int i = 2; i <= r - k; ++i) coef /= i;
        if ((r - k) % 2 == 1) coef = -coef;
        const MeanSE ek = estimate_Etk(model, kernel, q, t, k, sample_count, dt, rng);
        value += coef * ek.value;
        var += coef * coef * ek.se * ek.se;
    }
    return {value, std::sqrt(var)};
}

// A path is Wick-coupled when its rings' pairs form a perfect matching of the
// q particles: every particle interacts (rings) exactly once. Acceptance of
// the jump is irrelevant; interaction means the clock rang for the pair.
inline bool is_wick_coupled(const std::vector<RingRecord>& ring_log, int q) {
    if (q % 2 != 0 || static_cast<int>(ring_log.size()) != q / 2) return false;
    std::uint32_t seen = 0;
    for (const auto& ring : ring_log) {
        const std::uint32_t mask = (1u << ring.i) | (1u << ring.j);
        if (__builtin_popcount(mask) != 2 || (seen & mask)) return false;
        seen |= mask;
    }
    return seen == (1u << q) - 1u;
}

template <ParticleModel M>
struct WickConditionedResult {
    MeanSE value;               // E(F^e | Wick-coupled)
    double acceptance_rate = 0.0;  // fraction of q/2-ring paths that matched
    std::size_t kept = 0;
};

// Rejection estimate of E(F^e | W_t): sample q/2-ring conditional paths and
// keep those whose rings form a perfect matching. The acceptance fraction
// targets q! / (q(q-1))^{q/2}.
template <ParticleModel M>
WickConditionedResult<M> estimate_wick_conditioned(const M& model,
                                                   const Kernel<typename M::State>& kernel, int q,
                                                   double t, std::size_t attempts, double dt,
                                                   RngEngine& rng) {
    if (q < 2 || q % 2 != 0) throw DomainError("estimate_wick_conditioned: q must be even and >= 2");
    RunningStats stats;
    std::size_t matched = 0;
    for (std::size_t m = 0; m < attempts; ++m) {
        const auto path = sample_conditional_path(model, q, t, q / 2, dt, rng);
        if (!is_wick_coupled(path.ring_log, q)) continue;
        ++matched;
        stats.add(kernel(path.states) * path.weight);
    }
    WickConditionedResult<M> out;
    out.kept = matched;
    out.acceptance_rate = static_cast<double>(matched) / static_cast<double>(attempts);
    out.value = stats.mean_se();
    return out;
}

}  // namespace fkstat
