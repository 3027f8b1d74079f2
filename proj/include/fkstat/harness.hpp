#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fkstat/ensemble.hpp"
#include "fkstat/errors.hpp"
#include "fkstat/model.hpp"
#include "fkstat/rng.hpp"
#include "fkstat/special.hpp"

namespace fkstat {

// What to run: grid of particle counts, replica count, horizon, step, seed.
struct ExperimentPlan {
    std::vector<std::size_t> n_grid;
    std::size_t replicas = 0;
    double time_horizon = 0.0;
    double dt = 0.0;
    std::uint64_t base_seed = 0;

    void validate() const {
        if (replicas < 2) throw DomainError("ExperimentPlan: need at least 2 replicas");
        if (n_grid.empty()) throw DomainError("ExperimentPlan: empty N grid");
        for (std::size_t i = 1; i < n_grid.size(); ++i)
            if (n_grid[i] <= n_grid[i - 1]) throw DomainError("ExperimentPlan: N grid must be sorted");
        if (time_horizon <= 0.0) throw DomainError("ExperimentPlan: time horizon must be positive");
        if (dt <= 0.0) throw DomainError("ExperimentPlan: dt must be positive");
    }
};

// Replica samples for one N: values[replica][functional].
struct ReplicaMatrix {
    std::size_t n_particles = 0;
    std::vector<std::vector<double>> values;

    std::vector<double> column(std::size_t k) const {
        std::vector<double> out(values.size());
        for (std::size_t r = 0; r < values.size(); ++r) out[r] = values[r][k];
        return out;
    }
};

// Run R independent ensemble trajectories per grid point and evaluate the
// requested statistics on each terminal ensemble. Replicas run in parallel;
// every (N, replica) owns the stream keyed by (seed, experiment, N, replica),
// so results are identical for any job count.
template <ParticleModel M>
std::vector<ReplicaMatrix> run_replicas(
    const M& model, const ExperimentPlan& plan,
    const std::vector<std::function<double(const Ensemble<M>&)>>& statistics,
    std::uint64_t experiment = experiment_id::ensemble, unsigned jobs = 0) {
    plan.validate();
    if (statistics.empty()) throw DomainError("run_replicas: no statistics requested");
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());

    std::vector<ReplicaMatrix> out(plan.n_grid.size());
    for (std::size_t g = 0; g < plan.n_grid.size(); ++g) {
        out[g].n_particles = plan.n_grid[g];
        out[g].values.assign(plan.replicas, std::vector<double>(statistics.size(), 0.0));
    }

    struct Failure {
        std::size_t n, replica;
        std::uint64_t seed;
        std::string what;
    };
    std::optional<Failure> failure;
    std::mutex failure_mutex;

    const std::size_t total = plan.n_grid.size() * plan.replicas;
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t task = cursor.fetch_add(1);
            if (task >= total) return;
            const std::size_t g = task / plan.replicas;
            const std::size_t r = task % plan.replicas;
            const std::size_t n = plan.n_grid[g];
            try {
                RngEngine rng = make_stream(plan.base_seed, experiment, n, r);
                Ensemble<M> ens = init_ensemble(model, n, rng);
                advance_ensemble(ens, model, plan.time_horizon, plan.dt, rng);
                for (std::size_t k = 0; k < statistics.size(); ++k)
                    out[g].values[r][k] = statistics[k](ens);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = Failure{n, r, plan.base_seed, e.what()};
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(jobs, total));
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    if (failure) {
        std::ostringstream msg;
        msg << "replica failed at N=" << failure->n << " replica=" << failure->replica
            << " base_seed=" << failure->seed << ": " << failure->what;
        throw std::runtime_error(msg.str());
    }
    return out;
}

// One-sample Kolmogorov-Smirnov against Normal(mean, variance), asymptotic p.
inline double ks_normality(std::vector<double> samples, double mean, double variance) {
    if (samples.size() < 2) throw DomainError("ks_normality: need at least 2 samples");
    if (variance <= 0.0) return 0.0;
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = normal_cdf(samples[i], mean, variance);
        d = std::max(d, std::fabs(cdf - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - cdf));
    }
    const double root_n = std::sqrt(n);
    return kolmogorov_sf((root_n + 0.12 + 0.11 / root_n) * d);
}

// Two-sample Kolmogorov-Smirnov, asymptotic p.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.size() < 2 || b.size() < 2) throw DomainError("ks_two_sample: need at least 2 samples each");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] <= b[ib]) ++ia;
        else ++ib;
        d = std::max(d, std::fabs(static_cast<double>(ia) / a.size() -
                                  static_cast<double>(ib) / b.size()));
    }
    const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
    const double root = std::sqrt(ne);
    return kolmogorov_sf((root + 0.12 + 0.11 / root) * d);
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double ci_halfwidth = 0.0;      // 3 sigma
    std::vector<bool> flagged;      // |estimate| < 2 SE, excluded from the fit
    bool flagged_consistent = true;  // flagged magnitudes compatible with the fit
};

// Weighted regression of log|estimate| on log N. Entries indistinguishable
// from zero are excluded and only checked one-sidedly against the fitted line.
inline SlopeFit slope_fit(const std::vector<std::size_t>& n_grid,
                          const std::vector<double>& estimates, const std::vector<double>& ses) {
    if (n_grid.size() != estimates.size() || n_grid.size() != ses.size())
        throw DomainError("slope_fit: size mismatch");
    SlopeFit fit;
    fit.flagged.resize(n_grid.size());
    std::vector<double> xs, ys, ws;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        const double mag = std::fabs(estimates[i]);
        fit.flagged[i] = mag < 2.0 * ses[i];
        if (fit.flagged[i]) continue;
        xs.push_back(std::log(static_cast<double>(n_grid[i])));
        ys.push_back(std::log(mag));
        const double sigma = ses[i] > 0.0 ? ses[i] / mag : 1e-6;
        ws.push_back(1.0 / (sigma * sigma));
    }
    if (xs.size() < 2) throw FitDegenerate("slope_fit: fewer than 2 resolved points");
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sw += ws[i];
        sx += ws[i] * xs[i];
        sy += ws[i] * ys[i];
        sxx += ws[i] * xs[i] * xs[i];
        sxy += ws[i] * xs[i] * ys[i];
    }
    const double det = sw * sxx - sx * sx;
    if (det <= 0.0) throw FitDegenerate("slope_fit: degenerate abscissae");
    fit.slope = (sw * sxy - sx * sy) / det;
    fit.intercept = (sxx * sy - sx * sxy) / det;
    fit.slope_se = std::sqrt(sw / det);
    fit.ci_halfwidth = 3.0 * fit.slope_se;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (!fit.flagged[i]) continue;
        const double predicted =
            std::exp(fit.intercept + fit.slope * std::log(static_cast<double>(n_grid[i])));
        if (predicted > std::fabs(estimates[i]) + 3.0 * ses[i]) fit.flagged_consistent = false;
    }
    return fit;
}

struct ChiSquareResult {
    double statistic = 0.0;
    unsigned dof = 0;
    double p_value = 1.0;
};

// Goodness of fit of observed ring counts against Poisson(lambda_t), pooling
// the upper tail so that every bin expects at least 5 counts.
inline ChiSquareResult chi_square_poisson(const std::vector<unsigned>& counts, double lambda_t) {
    if (counts.empty()) throw DomainError("chi_square_poisson: empty sample");
    const double n = static_cast<double>(counts.size());
    if (lambda_t == 0.0) {
        ChiSquareResult r;
        for (unsigned c : counts)
            if (c != 0) { r.statistic = 1e300; r.p_value = 0.0; r.dof = 1; return r; }
        return r;  // p = 1: only the k=0 bin exists
    }
    unsigned max_count = 0;
    for (unsigned c : counts) max_count = std::max(max_count, c);

    // own bin while expected >= 5, everything above pooled
    unsigned cutoff = 0;
    while (n * poisson_pmf(lambda_t, cutoff) >= 5.0) ++cutoff;
    if (cutoff == 0) cutoff = 1;

    std::vector<double> observed(cutoff + 1, 0.0), expected(cutoff + 1, 0.0);
    for (unsigned c : counts) observed[std::min(c, cutoff)] += 1.0;
    double tail = 1.0;
    for (unsigned k = 0; k < cutoff; ++k) {
        expected[k] = n * poisson_pmf(lambda_t, k);
        tail -= poisson_pmf(lambda_t, k);
    }
    expected[cutoff] = n * std::max(tail, 0.0);
    while (expected.size() > 2 && expected.back() < 5.0) {
        expected[expected.size() - 2] += expected.back();
        observed[observed.size() - 2] += observed.back();
        expected.pop_back();
        observed.pop_back();
    }
    ChiSquareResult r;
    for (std::size_t k = 0; k < expected.size(); ++k) {
        if (expected[k] <= 0.0) continue;
        const double diff = observed[k] - expected[k];
        r.statistic += diff * diff / expected[k];
    }
    r.dof = static_cast<unsigned>(expected.size() - 1);
    r.p_value = chi_square_sf(r.statistic, r.dof);
    return r;
}

// Lag-1 autocorrelation; near zero for independent replicas.
inline double lag1_autocorrelation(const std::vector<double>& xs) {
    if (xs.size() < 3) throw DomainError("lag1_autocorrelation: need at least 3 samples");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        den += (xs[i] - mean) * (xs[i] - mean);
        if (i + 1 < xs.size()) num += (xs[i] - mean) * (xs[i + 1] - mean);
    }
    return den > 0.0 ? num / den : 0.0;
}

// Sample covariance matrix with moment-based SEs for each entry.
struct CovarianceEstimate {
    std::vector<std::vector<double>> cov;
    std::vector<std::vector<double>> se;
};

inline CovarianceEstimate empirical_covariance(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 3) throw DomainError("empirical_covariance: need at least 3 samples");
    const std::size_t r = rows.size(), q = rows[0].size();
    std::vector<double> mean(q, 0.0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < q; ++i) mean[i] += row[i];
    for (auto& m : mean) m /= static_cast<double>(r);

    CovarianceEstimate est;
    est.cov.assign(q, std::vector<double>(q, 0.0));
    est.se.assign(q, std::vector<double>(q, 0.0));
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = i; j < q; ++j) {
            double c = 0.0;
            for (const auto& row : rows) c += (row[i] - mean[i]) * (row[j] - mean[j]);
            c /= static_cast<double>(r - 1);
            double m4 = 0.0;
            for (const auto& row : rows) {
                const double p = (row[i] - mean[i]) * (row[j] - mean[j]);
                m4 += (p - c) * (p - c);
            }
            m4 /= static_cast<double>(r);
            const double se = std::sqrt(m4 / static_cast<double>(r));
            est.cov[i][j] = est.cov[j][i] = c;
            est.se[i][j] = est.se[j][i] = se;
        }
    return est;
}

}  // namespace fkstat
