#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fkstat/auxiliary.hpp"
#include "fkstat/errors.hpp"
#include "fkstat/kernels.hpp"
#include "fkstat/linalg.hpp"
#include "fkstat/running_stats.hpp"
#include "fkstat/special.hpp"

namespace fkstat {

// Monte Carlo estimates of one functional across a particle-count grid; the
// input to Laurent-coefficient fitting in powers of 1/N.
struct EstimateSeries {
    struct Entry {
        std::size_t n_particles = 0;
        double estimate = 0.0;
        double se = 0.0;
        std::size_t replicas = 0;
    };
    std::vector<Entry> entries;
    std::string label;

    void validate() const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].se < 0.0) throw DomainError("EstimateSeries: negative SE");
            if (i > 0 && entries[i].n_particles <= entries[i - 1].n_particles)
                throw DomainError("EstimateSeries: N values must be strictly increasing");
        }
    }
};

struct LaurentFit {
    std::vector<double> coefficients;  // c_l multiplies 1/N^l
    std::vector<double> ses;
    Matrix covariance;
    double condition = 0.0;
};

// Weighted least squares of the series against {1, 1/N, ..., 1/N^r} with
// weights 1/SE^2 (unweighted when any SE is zero, e.g. synthetic exact
// series). Columns are equilibrated before solving; the condition number of
// the equilibrated normal matrix is the degeneracy gate.
inline LaurentFit laurent_fit(const EstimateSeries& series, int order) {
    series.validate();
    const std::size_t rows = series.entries.size();
    const std::size_t cols = static_cast<std::size_t>(order) + 1;
    if (order < 0) throw DomainError("laurent_fit: order must be >= 0");
    if (rows < cols + 1) throw DomainError("laurent_fit: need at least order+2 grid points");

    bool weighted = true;
    for (const auto& e : series.entries)
        if (e.se <= 0.0) weighted = false;

    Matrix design(rows, cols);
    std::vector<double> w(rows, 1.0), y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double inv_n = 1.0 / static_cast<double>(series.entries[i].n_particles);
        double b = 1.0;
        for (std::size_t l = 0; l < cols; ++l) {
            design(i, l) = b;
            b *= inv_n;
        }
        y[i] = series.entries[i].estimate;
        if (weighted) w[i] = 1.0 / (series.entries[i].se * series.entries[i].se);
    }

    std::vector<double> scale(cols, 0.0);
    for (std::size_t l = 0; l < cols; ++l) {
        for (std::size_t i = 0; i < rows; ++i) scale[l] += w[i] * design(i, l) * design(i, l);
        scale[l] = std::sqrt(scale[l]);
        if (scale[l] == 0.0) throw FitDegenerate("laurent_fit: zero column");
        for (std::size_t i = 0; i < rows; ++i) design(i, l) /= scale[l];
    }

    Matrix normal(cols, cols);
    Matrix rhs(cols, 1);
    for (std::size_t a = 0; a < cols; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < rows; ++i) s += w[i] * design(i, a) * design(i, b);
            normal(a, b) = s;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += w[i] * design(i, a) * y[i];
        rhs(a, 0) = s;
    }

    const auto ev = symmetric_eigenvalues(normal);
    const double cond = ev.back() / std::max(ev.front(), 1e-300);
    if (!(ev.front() > 0.0) || cond > 1e12)
        throw FitDegenerate("laurent_fit: design condition number exceeds 1e12");

    const Matrix beta = solve(normal, rhs);
    Matrix cov = solve(normal, Matrix::identity(cols));

    // Unweighted fits estimate the residual variance from the data.
    if (!weighted) {
        double rss = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            double fit = 0.0;
            for (std::size_t l = 0; l < cols; ++l) fit += design(i, l) * beta(l, 0);
            rss += (y[i] - fit) * (y[i] - fit);
        }
        const double dof = static_cast<double>(rows - cols);
        const double sigma2 = dof > 0.0 ? rss / dof : 0.0;
        cov = cov.scaled(sigma2);
    }

    LaurentFit fit;
    fit.condition = cond;
    fit.coefficients.resize(cols);
    fit.ses.resize(cols);
    fit.covariance = Matrix(cols, cols);
    for (std::size_t a = 0; a < cols; ++a) {
        fit.coefficients[a] = beta(a, 0) / scale[a];
        for (std::size_t b = 0; b < cols; ++b)
            fit.covariance(a, b) = cov(a, b) / (scale[a] * scale[b]);
    }
    for (std::size_t a = 0; a < cols; ++a) fit.ses[a] = std::sqrt(std::max(0.0, fit.covariance(a, a)));
    return fit;
}

// Delta_{q/2}(F) for F = (f_1 (x) ... (x) f_q)_sym with centered factors:
// sum over pair partitions of products of W_t estimates. The W_t table is
// shared between pairings, so the error propagates through the gradient.
inline MeanSE wick_delta(const FiniteStateModel& model,
                         const std::vector<std::vector<double>>& f_list, double t,
                         std::size_t sample_count, double dt, RngEngine& rng) {
    const int q = static_cast<int>(f_list.size());
    if (q < 2 || q % 2 != 0) throw DomainError("wick_delta: q must be even and >= 2");

    std::vector<std::vector<MeanSE>> w(q, std::vector<MeanSE>(q));
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) {
            const auto wk = w_kernel(model, f_list[i], f_list[j], t, sample_count, dt, rng);
            w[i][j] = wk.value;
            w[j][i] = wk.value;
        }

    const auto pairings = pair_partitions(q);
    double value = 0.0;
    std::vector<std::vector<double>> grad(q, std::vector<double>(q, 0.0));
    for (const auto& pairing : pairings) {
        double prod = 1.0;
        for (const auto& [a, b] : pairing) prod *= w[a][b].value;
        value += prod;
        for (const auto& [a, b] : pairing) {
            double others = 1.0;
            for (const auto& [c, d] : pairing)
                if (!(c == a && d == b)) others *= w[c][d].value;
            grad[a][b] += others;
        }
    }
    double var = 0.0;
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) var += grad[i][j] * grad[i][j] * w[i][j].se * w[i][j].se;
    return {value, std::sqrt(var)};
}

// Theory side of the CLT covariance: K(i,j) = eta_t(f_i f_j) + W_t(f_i (x) f_j).
struct CovarianceReport {
    std::vector<std::vector<MeanSE>> k_theory;
    std::vector<std::vector<double>> k_hat;    // filled from replica samples
    std::vector<std::vector<double>> k_hat_se;
    std::vector<double> normality_p;           // per-marginal KS p-values
};

inline CovarianceReport clt_covariance(const FiniteStateModel& model,
                                       const std::vector<std::vector<double>>& f_list, double t,
                                       std::size_t sample_count, double dt, RngEngine& rng) {
    const int q = static_cast<int>(f_list.size());
    if (q < 1) throw DomainError("clt_covariance: empty function list");
    const OracleResult flow = exact_flow(model, t);
    for (const auto& f : f_list) {
        double mean = 0.0;
        for (std::size_t s = 0; s < f.size(); ++s) mean += flow.eta_vector[s] * f[s];
        if (std::fabs(mean) > 1e-9)
            throw DomainError("clt_covariance: functions must be centered under eta_t");
    }
    CovarianceReport rep;
    rep.k_theory.assign(q, std::vector<MeanSE>(q));
    for (int i = 0; i < q; ++i)
        for (int j = i; j < q; ++j) {
            double gram = 0.0;
            for (std::size_t s = 0; s < f_list[i].size(); ++s)
                gram += flow.eta_vector[s] * f_list[i][s] * f_list[j][s];
            const auto wk = w_kernel(model, f_list[i], f_list[j], t, sample_count, dt, rng);
            rep.k_theory[i][j] = MeanSE{gram, 0.0} + wk.value;
            rep.k_theory[j][i] = rep.k_theory[i][j];
        }
    return rep;
}

// Probabilists' Hermite polynomial H_q.
inline double hermite(int q, double x) {
    if (q < 0) throw DomainError("hermite: negative degree");
    double h0 = 1.0, h1 = x;
    if (q == 0) return h0;
    for (int n = 1; n < q; ++n) {
        const double h2 = x * h1 - n * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

// m-th moment of H_q(Z) with Z ~ N(0, s^2), by 64-node Gauss-Hermite
// quadrature (exact for polynomial integrands up to degree 127).
inline double hermite_limit_prediction(int q, double variance, int moment_order) {
    if (moment_order < 1) throw DomainError("hermite_limit_prediction: moment order must be >= 1");
    if (variance < 0.0) throw DomainError("hermite_limit_prediction: negative variance");
    static const QuadratureRule rule = gauss_hermite(64);
    const double s = std::sqrt(variance);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = M_SQRT2 * s * rule.nodes[i];
        sum += rule.weights[i] * std::pow(hermite(q, z), moment_order);
    }
    return sum / std::sqrt(M_PI);
}

}  // namespace fkstat
