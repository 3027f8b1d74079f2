#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fkstat/asymptotics.hpp"
#include "test_models.hpp"

using fkstat::EstimateSeries;
using fkstat::laurent_fit;

namespace {

EstimateSeries make_series(const std::vector<std::size_t>& ns,
                           const std::function<double(double)>& truth, double se) {
    EstimateSeries s;
    for (std::size_t n : ns)
        s.entries.push_back({n, truth(static_cast<double>(n)), se, 100});
    return s;
}

}  // namespace

TEST_CASE("laurent fit recovers an exact series") {
    const auto series = make_series({10, 20, 40, 80, 160},
                                    [](double n) { return 1.5 - 2.75 / n; }, 0.0);
    const auto fit = laurent_fit(series, 1);
    REQUIRE(fit.coefficients[0] == Catch::Approx(1.5).margin(1e-10));
    REQUIRE(fit.coefficients[1] == Catch::Approx(-2.75).margin(1e-8));
}

TEST_CASE("laurent fit of a constant series") {
    const auto series = make_series({10, 20, 40, 80}, [](double) { return 0.37; }, 0.0);
    const auto fit = laurent_fit(series, 1);
    REQUIRE(fit.coefficients[0] == Catch::Approx(0.37).margin(1e-12));
    REQUIRE(fit.coefficients[1] == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("laurent fit on noisy synthetic data lands within 3 fitted SEs") {
    std::mt19937_64 rng(99);
    const double se = 1e-3;
    std::normal_distribution<double> noise(0.0, se);
    EstimateSeries series;
    for (std::size_t n : {25u, 50u, 100u, 200u, 400u, 800u}) {
        const double truth = 2.0 + 3.0 / n + 0.5 / (static_cast<double>(n) * n);
        series.entries.push_back({n, truth + noise(rng), se, 1000});
    }
    const auto fit = laurent_fit(series, 2);
    REQUIRE(std::fabs(fit.coefficients[0] - 2.0) < 3.0 * fit.ses[0]);
    REQUIRE(std::fabs(fit.coefficients[1] - 3.0) < 3.0 * fit.ses[1]);
    REQUIRE(std::fabs(fit.coefficients[2] - 0.5) < 3.0 * fit.ses[2]);
}

TEST_CASE("laurent fit guards") {
    const auto series = make_series({10, 20, 40}, [](double n) { return 1.0 / n; }, 0.0);
    REQUIRE_THROWS_AS(laurent_fit(series, 2), fkstat::DomainError);  // too few points

    EstimateSeries degenerate;
    for (std::size_t n : {1000000u, 1000001u, 1000002u, 1000003u, 1000004u})
        degenerate.entries.push_back({n, 1.0, 0.0, 10});
    REQUIRE_THROWS_AS(laurent_fit(degenerate, 2), fkstat::FitDegenerate);

    EstimateSeries unsorted;
    unsorted.entries.push_back({100, 1.0, 0.1, 10});
    unsorted.entries.push_back({50, 1.0, 0.1, 10});
    REQUIRE_THROWS_AS(laurent_fit(unsorted, 0), fkstat::DomainError);
}

TEST_CASE("hermite polynomials") {
    REQUIRE(fkstat::hermite(1, 0.3) == Catch::Approx(0.3));
    REQUIRE(fkstat::hermite(2, 0.0) == Catch::Approx(-1.0));
    REQUIRE(fkstat::hermite(3, 2.0) == Catch::Approx(2.0));  // x^3 - 3x at 2
    REQUIRE(fkstat::hermite(4, 1.5) == Catch::Approx(std::pow(1.5, 4) - 6.0 * 1.5 * 1.5 + 3.0));
    REQUIRE(fkstat::hermite(0, 5.0) == 1.0);
}

TEST_CASE("hermite limit moments via Gauss-Hermite") {
    REQUIRE(fkstat::hermite_limit_prediction(2, 1.0, 1) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(fkstat::hermite_limit_prediction(2, 1.0, 2) == Catch::Approx(2.0).epsilon(1e-12));
    REQUIRE(fkstat::hermite_limit_prediction(2, 1.0, 3) == Catch::Approx(8.0).epsilon(1e-12));
    REQUIRE(fkstat::hermite_limit_prediction(1, 1.7, 2) == Catch::Approx(1.7).epsilon(1e-12));
    // H_2 with inflated variance: E[(Z^2-1)^2] = 3 s^4 - 2 s^2 + 1
    const double s2 = 1.3;
    REQUIRE(fkstat::hermite_limit_prediction(2, s2, 2) ==
            Catch::Approx(3.0 * s2 * s2 - 2.0 * s2 + 1.0).epsilon(1e-12));
}

TEST_CASE("wick_delta with q=2 is the single W estimate") {
    const auto model = fixtures::model_a();
    const double t = 0.7;
    const auto fc = fkstat::centered_table(model, t, {1.0, 0.0});

    auto rng_delta = fkstat::make_stream(41, 5, 0, 0);
    const auto delta = fkstat::wick_delta(model, {fc, fc}, t, 40000, 0.02, rng_delta);

    auto rng_w = fkstat::make_stream(42, 5, 0, 0);
    const auto wk = fkstat::w_kernel(model, fc, fc, t, 40000, 0.02, rng_w);

    const double combined = std::hypot(delta.se, wk.value.se);
    REQUIRE(std::fabs(delta.value - wk.value.value) < 3.0 * combined);
    REQUIRE_THROWS_AS(fkstat::wick_delta(model, {fc, fc, fc}, t, 100, 0.02, rng_delta),
                      fkstat::DomainError);
}

TEST_CASE("clt covariance: zero potential reduces to the Gram matrix") {
    const auto model = fixtures::model_zero_potential();
    const double t = 0.7;
    const auto flow = fkstat::exact_flow(model, t);
    const auto fc = fkstat::centered_table(model, t, {1.0, 0.0});
    // a second centered function, orthogonal by construction on 2 states is
    // proportional to fc; use fc and its negation scaled to exercise symmetry
    std::vector<double> gc(2);
    for (int s = 0; s < 2; ++s) gc[s] = -2.0 * fc[s];

    auto rng = fkstat::make_stream(43, 6, 0, 0);
    const auto rep = fkstat::clt_covariance(model, {fc, gc}, t, 30000, 0.02, rng);
    double gram_ff = 0.0, gram_fg = 0.0;
    for (int s = 0; s < 2; ++s) {
        gram_ff += flow.eta_vector[s] * fc[s] * fc[s];
        gram_fg += flow.eta_vector[s] * fc[s] * gc[s];
    }
    REQUIRE(std::fabs(rep.k_theory[0][0].value - gram_ff) < 3.0 * rep.k_theory[0][0].se + 1e-12);
    REQUIRE(std::fabs(rep.k_theory[0][1].value - gram_fg) < 3.0 * rep.k_theory[0][1].se + 1e-12);
    REQUIRE(rep.k_theory[0][1].value == rep.k_theory[1][0].value);

    REQUIRE_THROWS_AS(fkstat::clt_covariance(model, {{1.0, 0.0}}, t, 100, 0.02, rng),
                      fkstat::DomainError);
}
