#include "doctest.h"
#include "support.hpp"

using namespace mbgw;
using namespace mbgw::test;

namespace {
GenFunOptions tight() {
    GenFunOptions o;
    o.ode_rtol = 1e-12;
    o.ode_atol = 1e-14;
    return o;
}
}  // namespace

TEST_CASE("initial conditions") {
    GenFunEngine eng(fixture_two_type());
    Vec s{0.3, 0.8};
    CHECK(eng.F(0.0, s)[0] == doctest::Approx(0.3));
    CHECK(eng.F(0.0, s)[1] == doctest::Approx(0.8));
    CHECK(eng.laplace_Z(0.0, 1, {0.4, 0.9}) == doctest::Approx(std::exp(-0.9)));
    CHECK(eng.laplace_Z(1.3, 0, {0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eng.discounted_factorial_moment(0.0, 0, 1, {0.4, 0.9}) == doctest::Approx(std::exp(-0.4)));
    CHECK(eng.discounted_factorial_moment(0.0, 0, 2, {0.4, 0.9}) == doctest::Approx(0.0));
    Eigen::MatrixXd J = eng.jacobian(0.0, s);
    CHECK(J.isApprox(Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("pure death closed forms") {
    const double a = 1.4;
    GenFunEngine eng(fixture_pure_death(a), tight());
    for (double t : {0.1, 0.7, 2.5})
        for (double s : {0.0, 0.35, 0.9}) {
            double e = std::exp(-a * t);
            CHECK(eng.F(t, {s})[0] == doctest::Approx(1 + (s - 1) * e).epsilon(1e-10));
            CHECK(eng.jacobian(t, {s})(0, 0) == doctest::Approx(e).epsilon(1e-10));
            double th = 0.6;
            CHECK(eng.laplace_Z(t, 0, {th}) == doctest::Approx(1 + (std::exp(-th) - 1) * e).epsilon(1e-10));
        }
    CHECK(eng.survival_ge_k(0.8, 0, 1) == doctest::Approx(std::exp(-a * 0.8)).epsilon(1e-12));
}

TEST_CASE("binary fission closed forms") {
    const double a = 0.9;
    GenFunEngine eng(fixture_binary_fission(a), tight());
    for (double t : {0.2, 1.0, 2.0})
        for (double th : {0.0, 0.3, 1.5}) {
            double s = std::exp(-th);
            CHECK(rel(eng.F(t, {s})[0], bf_F(a, t, s)) <= 1e-8);
            CHECK(rel(eng.discounted_factorial_moment(t, 0, 1, {th}), s * bf_dF(a, t, s)) <= 1e-8);
            CHECK(rel(eng.discounted_factorial_moment(t, 0, 2, {th}), s * s * bf_d2F(a, t, s)) <= 1e-8);
            CHECK(rel(eng.pgf_partial(t, 0, 0, {s}), bf_dF(a, t, s)) <= 1e-8);
        }
    // Geometric population: P(N_t = n) = e (1 - e)^{n-1}.
    const double t = 1.1, e = std::exp(-a * t);
    Vec pm = eng.point_masses(t, 0, 6);
    CHECK(std::abs(pm[0]) <= 1e-12);
    for (int n = 1; n <= 6; ++n) CHECK(rel(pm[n], e * std::pow(1 - e, n - 1)) <= 1e-8);
    CHECK(eng.survival_ge_k(t, 0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eng.survival_ge_k(t, 0, 2) == doctest::Approx(1 - e).epsilon(1e-10));
}

TEST_CASE("factorial moments: ODE against the finite-difference route") {
    GenFunEngine eng(fixture_two_type(), tight());
    for (int j = 1; j <= 4; ++j)
        for (int m = 0; m < 2; ++m) {
            Vec th{0.2, 0.5};
            double a = eng.discounted_factorial_moment(1.2, m, j, th);
            double b = eng.discounted_factorial_moment_fd(1.2, m, j, th);
            CHECK(rel(a, b) <= 1e-6);
        }
}

TEST_CASE("Jacobian at one gives mean counts") {
    ModelSpec s = fixture_subcritical();
    GenFunEngine eng(s, tight());
    OracleConfig oc;
    oc.N_max = 120;
    OracleDistribution dist = oracle_distribution(s, 1.0, 0, oc);
    Eigen::MatrixXd J = eng.jacobian(1.0, {1.0, 1.0});
    for (int i = 0; i < 2; ++i) {
        double mean = 0.0;
        for (std::size_t q = 0; q < dist.states.size(); ++q) mean += dist.prob[q] * dist.states[q][i];
        CHECK(std::abs(J(0, i) - mean) <= 1e-8);
    }
    // d/dt E[Z_t] = E[Z_t] C.
    MeanMatrixData mm = mean_matrix(s);
    Eigen::MatrixXd E = Eigen::MatrixXd::Identity(2, 2), term = E;
    for (int n = 1; n < 40; ++n) {
        term = term * mm.C / n;
        E += term;
    }
    CHECK((J - E).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("point masses against the oracle") {
    ModelSpec s = fixture_two_type();
    GenFunEngine eng(s, tight());
    OracleConfig oc;
    oc.N_max = 200;
    OracleResult o = oracle_uniformization(s, 0.8, 1, OracleFunctional::point_masses(5), oc);
    Vec pm = eng.point_masses(0.8, 1, 5);
    for (int n = 0; n <= 5; ++n) CHECK(std::abs(pm[n] - o.values[n]) <= 1e-9);
    double surv = 1.0 - pm[0] - pm[1] - pm[2];
    CHECK(std::abs(eng.survival_ge_k(0.8, 1, 3) - surv) <= 1e-9);
}

TEST_CASE("trajectory interpolation matches direct solves") {
    GenFunEngine eng(fixture_two_type(), tight());
    const double T = 1.3;
    Ray ray = Ray::from_theta({0.1, 0.4});
    Trajectory tr(eng, T, ray, 3, 1024, true);
    for (double u : {0.0, 0.123, 0.61, 1.0, 1.3}) {
        TaylorData td = eng.taylor(u, ray, 3);
        for (int m = 0; m < 2; ++m) {
            CHECK(std::abs(tr.F(u, m) - td.coef[m][0]) <= 1e-9);
            for (int j = 1; j <= 3; ++j) CHECK(rel(tr.D(u, j, m), td.scaled_moment(m, j)) <= 1e-8);
        }
        Vec base = ray.base;
        CHECK((tr.jacobian(u) - eng.jacobian(u, base)).cwiseAbs().maxCoeff() <= 1e-8);
    }
    // mixed(t) is the Jacobian over t evaluated at F_{T-t}.
    for (double t : {0.2, 0.9}) {
        Vec s{tr.F(T - t, 0), tr.F(T - t, 1)};
        CHECK((tr.mixed(t) - eng.jacobian(t, s)).cwiseAbs().maxCoeff() <= 1e-7);
        CHECK((tr.mixed_between(0.3, 1.0) - eng.jacobian(0.7, {tr.F(T - 1.0, 0), tr.F(T - 1.0, 1)}))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-7);
    }
}

TEST_CASE("scaled ray moments carry w^j") {
    GenFunEngine eng(fixture_two_type(), tight());
    Vec th{0.7, 0.2};
    Ray ray = Ray::from_theta(th);
    CHECK(ray.w == doctest::Approx(std::exp(-0.2)));
    TaylorData td = eng.taylor(0.9, ray, 2);
    for (int m = 0; m < 2; ++m)
        CHECK(rel(td.scaled_moment(m, 2) * ray.w * ray.w, eng.discounted_factorial_moment(0.9, m, 2, th)) <= 1e-9);
    Ray rs = Ray::from_s(0.0, 2);
    TaylorData t0 = eng.taylor(0.9, rs, 2);
    Vec pm = eng.point_masses(0.9, 0, 2);
    CHECK(std::abs(t0.coef[0][2] - pm[2]) <= 1e-10);
}

TEST_CASE("invalid arguments") {
    GenFunEngine eng(fixture_two_type());
    CHECK_THROWS_AS(eng.F(-1.0, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(eng.F(1.0, {0.5}), ValidationError);
    CHECK_THROWS_AS(eng.discounted_factorial_moment(1.0, 0, 99, {0.1, 0.1}), ValidationError);
}
