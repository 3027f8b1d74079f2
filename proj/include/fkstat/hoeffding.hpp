#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <type_traits>
#include <utility>
#include <vector>

#include "fkstat/errors.hpp"
#include "fkstat/kernels.hpp"
#include "fkstat/model.hpp"
#include "fkstat/oracle.hpp"

namespace fkstat {

// Discrete reference measure: exact per-state weights for finite-state models,
// uniform atoms for an empirical surrogate. All integrals against it are exact
// weighted sums.
template <class State>
struct DiscreteReference {
    std::vector<State> atoms;
    std::vector<double> weights;

    double mean(const std::function<double(const State&)>& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) s += weights[i] * f(atoms[i]);
        return s;
    }
};

inline DiscreteReference<int> oracle_reference(const FiniteStateModel& model, double t) {
    const OracleResult flow = exact_flow(model, t);
    DiscreteReference<int> ref;
    ref.atoms.resize(flow.eta_vector.size());
    for (std::size_t i = 0; i < ref.atoms.size(); ++i) ref.atoms[i] = static_cast<int>(i);
    ref.weights = flow.eta_vector;
    return ref;
}

// Frozen empirical surrogate, for models with no exact flow. Carries the
// usual O(1/N) particle bias of the sample it came from.
template <class State>
DiscreteReference<State> empirical_reference(std::vector<State> points) {
    if (points.empty()) throw DomainError("empirical_reference: empty sample");
    DiscreteReference<State> ref;
    const double w = 1.0 / static_cast<double>(points.size());
    ref.weights.assign(points.size(), w);
    ref.atoms = std::move(points);
    return ref;
}

namespace detail {

template <class State>
Kernel<State> maybe_tabulate(Kernel<State> kernel, const DiscreteReference<State>& ref) {
    if constexpr (std::is_same_v<State, int>) {
        int n_states = 0;
        for (int a : ref.atoms) n_states = std::max(n_states, a + 1);
        return tabulate(kernel, n_states);
    } else {
        return kernel;
    }
}

}  // namespace detail

// F^{(k)}: integrate out the last q-k arguments of a symmetric kernel against
// the reference measure. Product kernels use the closed form
//   F^{(k)}(x) = ((q-k)!/q!) sum_{a in <k,q>} prod_i f_{a(i)}(x_i)
//                prod_{j not in Im a} mu(f_j),
// general kernels sum over reference-atom tuples.
template <class State>
Kernel<State> hoeffding_project(const Kernel<State>& kernel, int k,
                                const DiscreteReference<State>& ref) {
    const int q = kernel.arity();
    if (k < 1 || k > q) throw DomainError("hoeffding_project: k out of range");
    if (k == q) return kernel;

    if (kernel.is_product()) {
        auto factors = kernel.factors();
        auto factor_means = std::make_shared<std::vector<double>>(q);
        for (int j = 0; j < q; ++j) (*factor_means)[j] = ref.mean(factors[j]);
        auto shared_factors =
            std::make_shared<std::vector<typename Kernel<State>::Factor>>(std::move(factors));
        double scale = 1.0;  // (q-k)!/q!
        for (int i = k + 1; i <= q; ++i) scale /= i;
        const double bound = kernel.bound();
        return Kernel<State>::general(
            k,
            [q, k, scale, shared_factors, factor_means](const std::vector<State>& args) {
                double sum = 0.0;
                detail::for_each_injection<int>(q, k, [&](const std::vector<int>& a) {
                    double term = 1.0;
                    std::uint32_t image = 0;
                    for (int i = 0; i < k; ++i) {
                        term *= (*shared_factors)[a[i]](args[i]);
                        image |= 1u << a[i];
                    }
                    for (int j = 0; j < q; ++j)
                        if (!(image & (1u << j))) term *= (*factor_means)[j];
                    sum += term;
                });
                return scale * sum;
            },
            bound);
    }

    auto shared = std::make_shared<Kernel<State>>(kernel);
    auto ref_copy = std::make_shared<DiscreteReference<State>>(ref);
    return Kernel<State>::general(
        k,
        [q, k, shared, ref_copy](const std::vector<State>& args) {
            const int tail = q - k;
            const std::size_t atoms = ref_copy->atoms.size();
            std::vector<State> full(args.begin(), args.end());
            full.resize(q);
            std::vector<std::size_t> idx(tail, 0);
            double sum = 0.0;
            while (true) {
                double w = 1.0;
                for (int i = 0; i < tail; ++i) {
                    full[k + i] = ref_copy->atoms[idx[i]];
                    w *= ref_copy->weights[idx[i]];
                }
                sum += w * (*shared)(full);
                int d = tail - 1;
                while (d >= 0 && idx[d] == atoms - 1) idx[d--] = 0;
                if (d < 0) break;
                ++idx[d];
            }
            return sum;
        },
        kernel.bound());
}

// theta plus the completely degenerate components h^{(1)},...,h^{(q)}.
template <class State>
struct HoeffdingDecomposition {
    double theta = 0.0;
    std::vector<Kernel<State>> components;  // components[k-1] has arity k
    DiscreteReference<State> reference;

    const Kernel<State>& h(int k) const { return components.at(static_cast<std::size_t>(k) - 1); }
};

// Arity-q kernel summing h over all |h.arity()|-subsets of the q arguments
// (the sum_{(q,j)} h^{(j)} of the decomposition identity).
template <class State>
Kernel<State> subset_sum_kernel(const Kernel<State>& h, int q) {
    const int j = h.arity();
    if (j > q) throw DomainError("subset_sum_kernel: component arity exceeds q");
    auto shared = std::make_shared<Kernel<State>>(h);
    const double bound = h.bound() * static_cast<double>(binomial(q, j));
    return Kernel<State>::general(
        q,
        [shared, j, q](const std::vector<State>& args) {
            double sum = 0.0;
            std::vector<State> sub(j);
            detail::for_each_combination(q, j, [&](const std::vector<int>& idx) {
                for (int i = 0; i < j; ++i) sub[i] = args[idx[i]];
                sum += (*shared)(sub);
            });
            return sum;
        },
        bound);
}

// Recursive construction: h^{(k)} = F^{(k)} - sum_{j<k} sum_{(k,j)} h^{(j)} - theta.
// For int states every intermediate is tabulated, so repeated evaluation of the
// components is a table lookup.
template <class State>
HoeffdingDecomposition<State> hoeffding_decompose(const Kernel<State>& kernel,
                                                  const DiscreteReference<State>& ref) {
    const int q = kernel.arity();
    HoeffdingDecomposition<State> dec;
    dec.reference = ref;

    std::vector<Kernel<State>> projections;
    projections.reserve(q);
    for (int k = 1; k <= q; ++k)
        projections.push_back(detail::maybe_tabulate(hoeffding_project(kernel, k, ref), ref));

    dec.theta = ref.mean([&](const State& x) {
        std::vector<State> one{x};
        return projections[0](one);
    });

    std::vector<double> component_bounds;
    for (int k = 1; k <= q; ++k) {
        const Kernel<State>& fk = projections[k - 1];
        auto prev = std::make_shared<std::vector<Kernel<State>>>(dec.components);
        const double theta = dec.theta;
        double bound = fk.bound() + std::fabs(theta);
        for (int j = 1; j < k; ++j)
            bound += static_cast<double>(binomial(k, j)) * component_bounds[j - 1];
        Kernel<State> hk = Kernel<State>::general(
            k,
            [fk, prev, theta, k](const std::vector<State>& args) {
                double value = fk(args) - theta;
                std::vector<State> sub;
                for (int j = 1; j < k; ++j) {
                    const Kernel<State>& hj = (*prev)[j - 1];
                    sub.resize(j);
                    detail::for_each_combination(k, j, [&](const std::vector<int>& idx) {
                        for (int i = 0; i < j; ++i) sub[i] = args[idx[i]];
                        value -= hj(sub);
                    });
                }
                return value;
            },
            bound);
        component_bounds.push_back(bound);
        dec.components.push_back(detail::maybe_tabulate(std::move(hk), ref));
    }
    return dec;
}

// max_x | int h(x_1,...,x_{k-1}, y) ref(dy) |, evaluated on reference atoms;
// zero (to quadrature tolerance) for every component of a correct decomposition.
template <class State>
double max_marginal_residual(const Kernel<State>& h, const DiscreteReference<State>& ref) {
    const int k = h.arity();
    double worst = 0.0;
    std::vector<std::size_t> idx(static_cast<std::size_t>(k) - 1, 0);
    std::vector<State> args(k);
    while (true) {
        for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(k); ++i) args[i] = ref.atoms[idx[i]];
        double marginal = 0.0;
        for (std::size_t a = 0; a < ref.atoms.size(); ++a) {
            args[k - 1] = ref.atoms[a];
            marginal += ref.weights[a] * h(args);
        }
        worst = std::max(worst, std::fabs(marginal));
        if (k == 1) break;
        int d = k - 2;
        while (d >= 0 && idx[d] == ref.atoms.size() - 1) idx[d--] = 0;
        if (d < 0) break;
        ++idx[d];
    }
    return worst;
}

}  // namespace fkstat
