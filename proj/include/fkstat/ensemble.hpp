#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "fkstat/errors.hpp"
#include "fkstat/model.hpp"
#include "fkstat/rng.hpp"

namespace fkstat {

// One selection-clock event: particle i rang at `time` and drew target j;
// `accepted` records whether the jump fired.
struct RingEvent {
    double time = 0.0;
    int i = 0;
    int j = 0;
    bool accepted = false;
};

// State of the N-particle genetic system. `potential_integral` accumulates
// int_0^t eta^N_s(V_s) ds, so exp(-potential_integral) is the unnormalized
// mass gamma^N_t(1).
template <ParticleModel M>
struct Ensemble {
    std::vector<typename M::State> particles;
    double current_time = 0.0;
    double potential_integral = 0.0;

    std::size_t size() const { return particles.size(); }
};

template <ParticleModel M>
Ensemble<M> init_ensemble(const M& model, std::size_t n, RngEngine& rng) {
    if (n == 0) throw DomainError("init_ensemble: N must be >= 1");
    Ensemble<M> ens;
    ens.particles.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ens.particles.push_back(model.sample_initial(rng));
    return ens;
}

template <ParticleModel M, class Fn>
double empirical_expectation(const Ensemble<M>& ens, Fn&& f) {
    double s = 0.0;
    for (const auto& x : ens.particles) s += f(x);
    return s / static_cast<double>(ens.size());
}

template <ParticleModel M>
double mean_potential(const M& model, double t, const Ensemble<M>& ens) {
    double s = 0.0;
    for (const auto& x : ens.particles) s += model.potential(t, x);
    return s / static_cast<double>(ens.size());
}

// gamma^N_t(1)
template <ParticleModel M>
double gamma_normalizer(const Ensemble<M>& ens) {
    return std::exp(-ens.potential_integral);
}

// gamma^N_t(f) = gamma^N_t(1) * eta^N_t(f), exactly.
template <ParticleModel M, class Fn>
double gamma_expectation(const Ensemble<M>& ens, Fn&& f) {
    return gamma_normalizer(ens) * empirical_expectation(ens, std::forward<Fn>(f));
}

// Event-driven evolution to t_end. The N selection clocks superpose into a
// single rate N*V_inf exponential clock whose owner is uniform; between rings
// every particle diffuses over sub-intervals of length <= dt and the potential
// integral grows by the trapezoid rule on eta^N_s(V_s). At a ring the owner i
// draws a uniform target j (self allowed) and adopts its state with
// probability V_tau(xi^i)/V_inf.
template <ParticleModel M>
void advance_ensemble(Ensemble<M>& ens, const M& model, double t_end, double dt, RngEngine& rng,
                      std::vector<RingEvent>* event_log = nullptr) {
    if (dt <= 0.0) throw DomainError("advance_ensemble: dt must be positive");
    if (t_end < ens.current_time) throw DomainError("advance_ensemble: t_end before current time");
    const int n = static_cast<int>(ens.size());
    const double v_inf = model.potential_bound();
    std::exponential_distribution<double> ring_gap(n * v_inf);
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double t = ens.current_time;
    double mean_v = mean_potential(model, t, ens);
    while (t < t_end) {
        const double ring_time = t + ring_gap(rng);
        const double segment_end = std::min(ring_time, t_end);
        while (t < segment_end) {
            const double h = std::min(dt, segment_end - t);
            for (auto& x : ens.particles) x = model.step(t, x, h, rng);
            t += h;
            const double mv = mean_potential(model, t, ens);
            ens.potential_integral += 0.5 * h * (mean_v + mv);
            mean_v = mv;
        }
        if (ring_time <= t_end) {
            const int i = pick(rng);
            const int j = pick(rng);
            const double accept_p = model.potential(ring_time, ens.particles[i]) / v_inf;
            const bool accepted = unif(rng) < accept_p;
            if (accepted) {
                ens.particles[i] = ens.particles[j];
                mean_v = mean_potential(model, ring_time, ens);
            }
            if (event_log) event_log->push_back({ring_time, i, j, accepted});
        }
    }
    ens.current_time = t_end;
}

}  // namespace fkstat
