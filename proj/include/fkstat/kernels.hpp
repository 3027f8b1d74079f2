#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "fkstat/errors.hpp"

namespace fkstat {

inline constexpr int kMaxArity = 8;

// (N)_q = N (N-1) ... (N-q+1), with overflow detection.
inline std::uint64_t falling_factorial(std::uint64_t n, unsigned q) {
    std::uint64_t r = 1;
    for (unsigned i = 0; i < q; ++i) {
        const std::uint64_t factor = n - i;
        if (n < i || (factor != 0 && r > UINT64_MAX / factor))
            throw DomainError("falling_factorial: overflow or q > N");
        r *= factor;
    }
    return r;
}

inline std::uint64_t binomial(std::uint64_t n, unsigned q) {
    std::uint64_t num = falling_factorial(n, q);
    for (unsigned i = 2; i <= q; ++i) num /= i;
    return num;
}

// All partitions of {0,...,q-1} into pairs, q even.
inline std::vector<std::vector<std::pair<int, int>>> pair_partitions(int q) {
    if (q <= 0 || q % 2 != 0) throw DomainError("pair_partitions: q must be positive and even");
    std::vector<std::vector<std::pair<int, int>>> out;
    std::vector<std::pair<int, int>> current;
    std::vector<bool> used(q, false);
    auto rec = [&](auto&& self) -> void {
        int first = 0;
        while (first < q && used[first]) ++first;
        if (first == q) {
            out.push_back(current);
            return;
        }
        used[first] = true;
        for (int second = first + 1; second < q; ++second) {
            if (used[second]) continue;
            used[second] = true;
            current.emplace_back(first, second);
            self(self);
            current.pop_back();
            used[second] = false;
        }
        used[first] = false;
    };
    rec(rec);
    return out;
}

// All set partitions of {0,...,q-1}, blocks encoded as bitmasks.
inline std::vector<std::vector<std::uint32_t>> set_partitions(int q) {
    if (q <= 0 || q > kMaxArity) throw DomainError("set_partitions: q out of range");
    std::vector<std::vector<std::uint32_t>> out;
    std::vector<std::uint32_t> blocks;
    auto rec = [&](auto&& self, int element) -> void {
        if (element == q) {
            out.push_back(blocks);
            return;
        }
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            blocks[b] |= (1u << element);
            self(self, element + 1);
            blocks[b] &= ~(1u << element);
        }
        blocks.push_back(1u << element);
        self(self, element + 1);
        blocks.pop_back();
    };
    rec(rec, 0);
    return out;
}

// Bounded test function on E^q: either an arbitrary callable or a symmetrized
// product of univariate factors. Product kernels evaluate through the
// permanent (Ryser), which equals the average over all q! factor orders.
template <class State>
class Kernel {
public:
    using Tuple = std::vector<State>;
    using GeneralFn = std::function<double(const Tuple&)>;
    using Factor = std::function<double(const State&)>;

    static Kernel general(int arity, GeneralFn fn, double bound) {
        Kernel k;
        k.init_arity(arity);
        k.general_ = std::move(fn);
        k.bound_ = bound;
        return k;
    }

    static Kernel product(std::vector<Factor> factors, double bound,
                          std::vector<bool> centered = {}) {
        Kernel k;
        k.init_arity(static_cast<int>(factors.size()));
        k.factors_ = std::move(factors);
        k.bound_ = bound;
        if (centered.empty()) centered.assign(k.factors_.size(), false);
        if (centered.size() != k.factors_.size())
            throw DomainError("Kernel: centered flags size mismatch");
        k.centered_ = std::move(centered);
        return k;
    }

    int arity() const { return arity_; }
    bool is_product() const { return !factors_.empty(); }
    double bound() const { return bound_; }
    const std::vector<Factor>& factors() const { return factors_; }
    const std::vector<bool>& centered_flags() const { return centered_; }

    // Raw evaluation. Product kernels are symmetric by construction, so this
    // is already the symmetrized value for them.
    double operator()(const Tuple& args) const {
        if (static_cast<int>(args.size()) != arity_) throw DomainError("Kernel: arity mismatch");
        const double v = is_product() ? permanent_over_qfact(args) : general_(args);
        if (std::fabs(v) > bound_ * (1.0 + 1e-9))
            throw InvariantViolation("Kernel: declared bound exceeded");
        return v;
    }

    // (1/q!) sum over argument permutations.
    double symmetrized(Tuple args) const {
        if (is_product()) return (*this)(args);
        std::vector<int> perm(arity_);
        std::iota(perm.begin(), perm.end(), 0);
        Tuple scratch(arity_);
        double sum = 0.0;
        std::uint64_t count = 0;
        do {
            for (int i = 0; i < arity_; ++i) scratch[i] = args[perm[i]];
            sum += (*this)(scratch);
            ++count;
        } while (std::next_permutation(perm.begin(), perm.end()));
        return sum / static_cast<double>(count);
    }

private:
    void init_arity(int arity) {
        if (arity < 1 || arity > kMaxArity) throw DomainError("Kernel: arity must be in [1, 8]");
        arity_ = arity;
    }

    // Ryser's formula on M_{ij} = f_i(x_j); perm(M)/q! is the symmetrized
    // product value.
    double permanent_over_qfact(const Tuple& args) const {
        const int q = arity_;
        std::vector<double> m(static_cast<std::size_t>(q) * q);
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) m[i * q + j] = factors_[i](args[j]);
        double total = 0.0;
        const std::uint32_t full = (1u << q) - 1u;
        for (std::uint32_t mask = 1; mask <= full; ++mask) {
            double prod = 1.0;
            for (int i = 0; i < q; ++i) {
                double row = 0.0;
                for (int j = 0; j < q; ++j)
                    if (mask & (1u << j)) row += m[i * q + j];
                prod *= row;
            }
            const int bits = __builtin_popcount(mask);
            total += ((q - bits) % 2 == 0 ? 1.0 : -1.0) * prod;
        }
        double qfact = 1.0;
        for (int i = 2; i <= q; ++i) qfact *= i;
        return total / qfact;
    }

    int arity_ = 0;
    GeneralFn general_;
    std::vector<Factor> factors_;
    std::vector<bool> centered_;
    double bound_ = 0.0;
};

// General kernel wrapping the symmetrization of another kernel.
template <class State>
Kernel<State> symmetrize(const Kernel<State>& k) {
    return Kernel<State>::general(
        k.arity(), [k](const typename Kernel<State>::Tuple& args) { return k.symmetrized(args); },
        k.bound());
}

namespace detail {

template <class State, class Visit>
void for_each_injection(int n, int q, Visit&& visit) {
    std::vector<int> idx(q, -1);
    std::vector<bool> used(n, false);
    auto rec = [&](auto&& self, int depth) -> void {
        if (depth == q) {
            visit(idx);
            return;
        }
        for (int i = 0; i < n; ++i) {
            if (used[i]) continue;
            used[i] = true;
            idx[depth] = i;
            self(self, depth + 1);
            used[i] = false;
        }
    };
    rec(rec, 0);
}

template <class Visit>
void for_each_combination(int n, int q, Visit&& visit) {
    std::vector<int> idx(q);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        visit(idx);
        int i = q - 1;
        while (i >= 0 && idx[i] == n - q + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < q; ++j) idx[j] = idx[j - 1] + 1;
    }
}

}  // namespace detail

// U-statistic m(x)^{.odot q}(F): average of F over ordered tuples of distinct
// particles. Small problems enumerate all injections directly; larger ones use
// the equivalent binomial form over sorted index subsets of F_sym.
template <class State>
double u_statistic(const std::vector<State>& points, const Kernel<State>& kernel) {
    const int n = static_cast<int>(points.size());
    const int q = kernel.arity();
    if (n < q) throw DomainError("u_statistic: fewer points than kernel arity");
    typename Kernel<State>::Tuple args(q);
    double sum = 0.0;
    if (q <= 3 || n <= 12) {
        detail::for_each_injection<State>(n, q, [&](const std::vector<int>& idx) {
            for (int i = 0; i < q; ++i) args[i] = points[idx[i]];
            sum += kernel(args);
        });
        return sum / static_cast<double>(falling_factorial(n, q));
    }
    detail::for_each_combination(n, q, [&](const std::vector<int>& idx) {
        for (int i = 0; i < q; ++i) args[i] = points[idx[i]];
        sum += kernel.symmetrized(args);
    });
    return sum / static_cast<double>(binomial(n, q));
}

// Tensor statistic m(x)^{\otimes q}(F): average over all tuples, repetitions
// allowed. Product kernels reduce to a product of empirical means.
template <class State>
double tensor_statistic(const std::vector<State>& points, const Kernel<State>& kernel) {
    const int n = static_cast<int>(points.size());
    const int q = kernel.arity();
    if (n < 1) throw DomainError("tensor_statistic: empty point set");
    if (kernel.is_product()) {
        double prod = 1.0;
        for (const auto& f : kernel.factors()) {
            double s = 0.0;
            for (const auto& x : points) s += f(x);
            prod *= s / n;
        }
        return prod;
    }
    double total_tuples = std::pow(static_cast<double>(n), q);
    if (total_tuples > 2e8) throw DomainError("tensor_statistic: enumeration too large");
    typename Kernel<State>::Tuple args(q);
    double sum = 0.0;
    std::vector<int> idx(q, 0);
    while (true) {
        for (int i = 0; i < q; ++i) args[i] = points[idx[i]];
        sum += kernel(args);
        int d = q - 1;
        while (d >= 0 && idx[d] == n - 1) idx[d--] = 0;
        if (d < 0) break;
        ++idx[d];
    }
    return sum / total_tuples;
}

// Rubin-Vitale expansion of the *unnormalized* injection sum for a product
// kernel: with m = sum_i delta_{x_i} (counting measure, no 1/N),
//   sum_{s injective} prod_v f_v(x_{s(v)})
//     = sum_{partitions P} prod_{V in P} (-1)^{|V|-1} (|V|-1)! m(prod_{v in V} f_v).
// Divide by (N)_q for the U-statistic average.
template <class State>
double rubin_vitale(const std::vector<State>& points, const Kernel<State>& kernel) {
    if (!kernel.is_product()) throw UnsupportedError("rubin_vitale: product-form kernel required");
    const int q = kernel.arity();
    const auto& factors = kernel.factors();
    const std::uint32_t masks = 1u << q;
    std::vector<double> power_sum(masks, 0.0);
    std::vector<double> prod(masks);
    for (const auto& x : points) {
        prod[0] = 1.0;
        for (std::uint32_t mask = 1; mask < masks; ++mask) {
            const std::uint32_t low = mask & (~mask + 1u);
            const int v = __builtin_ctz(low);
            prod[mask] = prod[mask ^ low] * factors[v](x);
        }
        for (std::uint32_t mask = 1; mask < masks; ++mask) power_sum[mask] += prod[mask];
    }
    static thread_local std::vector<std::vector<std::vector<std::uint32_t>>> cache(kMaxArity + 1);
    if (cache[q].empty()) cache[q] = set_partitions(q);
    double fact[kMaxArity + 1];
    fact[0] = 1.0;
    for (int i = 1; i <= kMaxArity; ++i) fact[i] = fact[i - 1] * i;
    double total = 0.0;
    for (const auto& partition : cache[q]) {
        double term = 1.0;
        for (const std::uint32_t block : partition) {
            const int size = __builtin_popcount(block);
            term *= (size % 2 == 1 ? 1.0 : -1.0) * fact[size - 1] * power_sum[block];
        }
        total += term;
    }
    return total;
}

// Fast U-statistic average: Rubin-Vitale route for product kernels (O(2^q N)),
// full enumeration otherwise. Equality of the two routes is a tested identity.
template <class State>
double u_statistic_fast(const std::vector<State>& points, const Kernel<State>& kernel) {
    if (kernel.is_product()) {
        const auto n = static_cast<std::uint64_t>(points.size());
        if (n < static_cast<std::uint64_t>(kernel.arity()))
            throw DomainError("u_statistic_fast: fewer points than kernel arity");
        return rubin_vitale(points, kernel) /
               static_cast<double>(falling_factorial(n, kernel.arity()));
    }
    return u_statistic(points, kernel);
}

// Dense-table reindexing of a Kernel<int> over states {0,...,n_states-1}.
// Turns deep closure chains (Hoeffding components) into O(1) lookups.
inline Kernel<int> tabulate(const Kernel<int>& kernel, int n_states) {
    const int q = kernel.arity();
    std::size_t size = 1;
    for (int i = 0; i < q; ++i) size *= static_cast<std::size_t>(n_states);
    auto table = std::make_shared<std::vector<double>>(size);
    std::vector<int> tup(q, 0);
    for (std::size_t flat = 0; flat < size; ++flat) {
        std::size_t rest = flat;
        for (int i = q - 1; i >= 0; --i) {
            tup[i] = static_cast<int>(rest % n_states);
            rest /= n_states;
        }
        (*table)[flat] = kernel(tup);
    }
    double bound = 0.0;
    for (double v : *table) bound = std::max(bound, std::fabs(v));
    return Kernel<int>::general(
        q,
        [table, n_states, q](const std::vector<int>& args) {
            std::size_t flat = 0;
            for (int i = 0; i < q; ++i) flat = flat * n_states + static_cast<std::size_t>(args[i]);
            return (*table)[flat];
        },
        bound);
}

}  // namespace fkstat
