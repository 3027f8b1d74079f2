#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fkstat/model.hpp"
#include "fkstat/oracle.hpp"
#include "fkstat/running_stats.hpp"
#include "oracles.hpp"
#include "test_models.hpp"

using fkstat::FiniteStateModel;
using fkstat::Matrix;

TEST_CASE("model construction rejects invalid input") {
    Matrix bad_row(2, 2);
    bad_row(0, 0) = -1.0;
    bad_row(0, 1) = 2.0;  // row sums to 1
    bad_row(1, 1) = 0.0;
    REQUIRE_THROWS_AS(FiniteStateModel(bad_row, {0.0, 0.0}, 1.0, {1.0, 0.0}),
                      fkstat::InvariantViolation);

    Matrix neg_off(2, 2);
    neg_off(0, 0) = 1.0;
    neg_off(0, 1) = -1.0;
    neg_off(1, 0) = 1.0;
    neg_off(1, 1) = -1.0;
    REQUIRE_THROWS_AS(FiniteStateModel(neg_off, {0.0, 0.0}, 1.0, {1.0, 0.0}),
                      fkstat::InvariantViolation);

    REQUIRE_THROWS_AS(FiniteStateModel(fixtures::two_state_rates(1, 2), {0.0, 0.0}, 1.0, {0.6, 0.5}),
                      fkstat::InvariantViolation);
    REQUIRE_THROWS_AS(FiniteStateModel(fixtures::two_state_rates(1, 2), {0.5, 1.5}, 1.0, {1.0, 0.0}),
                      fkstat::InvariantViolation);
}

TEST_CASE("exact_gamma: frozen chain with constant potential gives e^{-ct}") {
    const auto model = fixtures::model_frozen(1.0);
    REQUIRE(fkstat::exact_gamma(model, 1.0, {1.0, 1.0}) ==
            Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("exact_gamma at t=0 returns eta_0(f)") {
    const auto model = fixtures::model_a_mixed();
    REQUIRE(fkstat::exact_gamma(model, 0.0, {2.0, -1.0}) ==
            Catch::Approx(0.3 * 2.0 - 0.7).epsilon(1e-13));
}

TEST_CASE("exact_gamma frozen value from the independent matrix-exponential oracle") {
    const auto model = fixtures::model_a();
    REQUIRE(fkstat::exact_gamma(model, 0.7, {1.0, 0.0}) ==
            Catch::Approx(0.48404380058892515).epsilon(1e-11));
    REQUIRE(fkstat::exact_gamma(model, 0.7, {1.0, 1.0}) ==
            Catch::Approx(0.661235264374886).epsilon(1e-11));
    // and directly against the series-exponential route
    const auto direct = oracles::series_gamma_vector(model, 0.7);
    REQUIRE(fkstat::exact_gamma(model, 0.7, {1.0, 0.0}) == Catch::Approx(direct[0]).epsilon(1e-12));
}

TEST_CASE("exact_eta ratio, frozen value and t=0") {
    const auto model = fixtures::model_a();
    REQUIRE(fkstat::exact_eta(model, 0.7, {1.0, 0.0}) ==
            Catch::Approx(0.7320296219327127).epsilon(1e-11));
    REQUIRE(fkstat::exact_eta(model, 0.0, {1.0, 0.0}) == Catch::Approx(1.0));
    REQUIRE_THROWS_AS(fkstat::exact_gamma(model, -0.5, {1.0, 0.0}), fkstat::DomainError);
}

TEST_CASE("constant potential cancels in eta: matches the potential-free law") {
    const auto with_v = fixtures::model_constant_potential(0.8);
    const FiniteStateModel free_chain(fixtures::two_state_rates(1, 2), {0.0, 0.0}, 1.0, {0.3, 0.7});
    for (double t : {0.3, 1.1}) {
        const double eta_v = fkstat::exact_eta(with_v, t, {1.0, 0.0});
        const double eta_free = fkstat::exact_eta(free_chain, t, {1.0, 0.0});
        REQUIRE(eta_v == Catch::Approx(eta_free).epsilon(1e-12));
    }
}

TEST_CASE("piecewise-constant potential multiplies interval propagators") {
    // grid with equal tables must agree with the single-table model
    fkstat::PiecewisePotential grid;
    grid.breakpoints = {0.0, 0.4};
    grid.tables = {{0.5, 1.0}, {0.5, 1.0}};
    const FiniteStateModel split(fixtures::two_state_rates(1, 2), grid, 1.0, {1.0, 0.0});
    const auto single = fixtures::model_a();
    REQUIRE(fkstat::exact_gamma(split, 0.7, {1.0, 0.0}) ==
            Catch::Approx(fkstat::exact_gamma(single, 0.7, {1.0, 0.0})).epsilon(1e-12));

    // a genuinely time-dependent grid: second interval with zero potential
    fkstat::PiecewisePotential vary;
    vary.breakpoints = {0.0, 0.4};
    vary.tables = {{0.5, 1.0}, {0.0, 0.0}};
    const FiniteStateModel varying(fixtures::two_state_rates(1, 2), vary, 1.0, {1.0, 0.0});
    // manual interval product with the series oracle
    Matrix a1 = fixtures::two_state_rates(1, 2);
    a1(0, 0) -= 0.5;
    a1(1, 1) -= 1.0;
    const Matrix p1 = oracles::series_expm(a1.scaled(0.4));
    const Matrix p2 = oracles::series_expm(fixtures::two_state_rates(1, 2).scaled(0.3));
    auto mass = p2.apply_transposed(p1.apply_transposed({1.0, 0.0}));
    REQUIRE(fkstat::exact_gamma(varying, 0.7, {1.0, 0.0}) == Catch::Approx(mass[0]).epsilon(1e-12));
}

TEST_CASE("flow ODE consistency: d gamma_t(f)/dt = gamma_t(Gf) - gamma_t(fV)") {
    const auto model = fixtures::model_a_mixed();
    const double t = 0.6;
    const std::vector<double> f{1.0, -0.5};
    const auto flow = fkstat::exact_flow(model, t);
    const auto gf = model.rate_matrix().apply(f);
    std::vector<double> fv(2);
    for (int s = 0; s < 2; ++s) fv[s] = f[s] * model.potential(t, s);
    const double exact_rate = fkstat::exact_gamma(model, t, gf) - fkstat::exact_gamma(model, t, fv);

    double err_prev = 0.0;
    for (double h : {1e-3, 1e-4}) {
        const double fd =
            (fkstat::exact_gamma(model, t + h, f) - fkstat::exact_gamma(model, t, f)) / h;
        const double err = std::fabs(fd - exact_rate);
        if (err_prev > 0.0) {
            const double ratio = err_prev / err;
            REQUIRE(ratio > 5.0);
            REQUIRE(ratio < 20.0);
        }
        err_prev = err;
    }
    (void)flow;
}

TEST_CASE("gamma mass is nonincreasing and eta of constants is one") {
    const auto model = fixtures::model_a_mixed();
    double prev = 1.0;
    for (double t : {0.0, 0.25, 0.5, 1.0, 2.0}) {
        const auto flow = fkstat::exact_flow(model, t);
        REQUIRE(flow.gamma_mass <= prev + 1e-13);
        REQUIRE(flow.gamma_mass > 0.0);
        REQUIRE(fkstat::exact_eta(model, t, {1.0, 1.0}) == Catch::Approx(1.0).epsilon(1e-13));
        prev = flow.gamma_mass;
    }
}

TEST_CASE("finite-state step: zero generator leaves the state unchanged") {
    const auto model = fixtures::model_frozen();
    auto rng = fkstat::make_stream(1, 1, 1, 1);
    REQUIRE(model.step(0.0, 0, 0.5, rng) == 0);
    REQUIRE(model.step(0.0, 1, 5.0, rng) == 1);
}

TEST_CASE("diffusion step: zero drift and noise is the identity") {
    fkstat::DiffusionModel still(
        1, [](double, const std::vector<double>&) { return std::vector<double>{0.0}; },
        [](double, const std::vector<double>&) { return std::vector<double>{0.0}; },
        [](double, const std::vector<double>&) { return 0.0; }, 1.0,
        [](fkstat::RngEngine&) { return std::vector<double>{0.7}; });
    auto rng = fkstat::make_stream(2, 1, 1, 1);
    const auto x = still.step(0.0, {0.7}, 0.3, rng);
    REQUIRE(x[0] == 0.7);
}

TEST_CASE("Brownian step variance matches dt within 3 standard errors") {
    const auto model = fixtures::brownian_model();
    auto rng = fkstat::make_stream(3, 1, 1, 1);
    fkstat::RunningStats stats;
    const double dt = 0.01;
    for (int i = 0; i < 100000; ++i) {
        const auto y = model.step(0.0, {0.0}, dt, rng);
        stats.add(y[0] * y[0]);
    }
    // SE of the sample second moment of N(0, dt): sqrt(2) dt / sqrt(n)
    const double se = std::sqrt(2.0) * dt / std::sqrt(1e5);
    REQUIRE(std::fabs(stats.mean() - dt) < 3.0 * se);
}

TEST_CASE("potential evaluations outside the bound are rejected") {
    const auto model = fixtures::model_a();
    REQUIRE(model.potential(0.0, 1) == 1.0);
    fkstat::DiffusionModel bad(
        1, [](double, const std::vector<double>&) { return std::vector<double>{0.0}; },
        [](double, const std::vector<double>&) { return std::vector<double>{1.0}; },
        [](double, const std::vector<double>& x) { return 2.0 * std::fabs(x[0]); }, 1.0,
        [](fkstat::RngEngine&) { return std::vector<double>{3.0}; });
    REQUIRE_THROWS_AS(bad.potential(0.0, {3.0}), fkstat::InvariantViolation);
}
