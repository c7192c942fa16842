#include "doctest.h"
#include "support.hpp"

using namespace mbgw;
using mbgw::test::spec_of;

TEST_CASE("mean matrix equals direct summation") {
    ModelSpec s = fixture_two_type();
    MeanMatrixData mm = mean_matrix(s);
    for (int i = 0; i < s.d; ++i)
        for (int j = 0; j < s.d; ++j) {
            double m = 0.0;
            for (const auto& a : s.offspring[i].atoms) m += a.counts[j] * a.p;
            CHECK(mm.M(i, j) == doctest::Approx(m).epsilon(1e-14));
            double c = s.alpha[i] * (m - (i == j ? 1.0 : 0.0));
            CHECK(mm.C(i, j) == doctest::Approx(c).epsilon(1e-14));
        }
    Eigen::VectorXd r = mm.C * mm.xi_perron - mm.rho * mm.xi_perron;
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(mm.classification == Classification::supercritical);
}

TEST_CASE("single-type growth rate is alpha (m - 1)") {
    ModelSpec s = spec_of({1.7}, {{{{0}, 0.2}, {{1}, 0.1}, {{3}, 0.7}}});
    double m = 0.1 + 3 * 0.7;
    CHECK(mean_matrix(s).rho == doctest::Approx(1.7 * (m - 1.0)).epsilon(1e-12));
    ModelSpec crit = spec_of({1.0}, {{{{0}, 0.5}, {{2}, 0.5}}});
    MeanMatrixData mm = mean_matrix(crit);
    CHECK(mm.M(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(mm.rho) <= 1e-12);
    CHECK(mm.classification == Classification::critical);
}

TEST_CASE("type swap with unit means: rho 0, uniform Perron vector") {
    // M = [[0,1],[1,0]] from two-child / no-child atoms, so the model is non-simple.
    ModelSpec s = spec_of({1.0, 1.0}, {{{{0, 0}, 0.5}, {{0, 2}, 0.5}}, {{{0, 0}, 0.5}, {{2, 0}, 0.5}}});
    MeanMatrixData mm = mean_matrix(s);
    CHECK(std::abs(mm.rho) <= 1e-12);
    CHECK(mm.xi_perron(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mm.xi_perron(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hypothesis flags") {
    ModelSpec bf = fixture_binary_fission();
    ValidationReport r = validate_model(bf);
    CHECK(r.non_simple);
    CHECK(r.irreducible);
    CHECK(r.hypothesis_ok());

    ModelSpec swap = spec_of({1.0, 1.0}, {{{{0, 1}, 1.0}}, {{{1, 0}, 1.0}}});
    CHECK_FALSE(validate_model(swap).non_simple);

    ModelSpec red = spec_of({1.0, 1.0}, {{{{0, 0}, 0.5}, {{2, 0}, 0.5}}, {{{0, 0}, 0.5}, {{0, 2}, 0.5}}});
    CHECK_FALSE(validate_model(red).irreducible);
    CHECK_FALSE(validate_model(red).hypothesis_ok());
}

TEST_CASE("structural validation rejects bad input") {
    ModelSpec s = fixture_two_type();
    s.offspring[0].atoms[0].p = -0.1;
    CHECK_THROWS_AS(s.check_structure(), ValidationError);
    s = fixture_two_type();
    s.offspring[1].atoms[1].counts = s.offspring[1].atoms[0].counts;
    CHECK_THROWS_AS(s.check_structure(), ValidationError);
    s = fixture_two_type();
    s.offspring[0].atoms[0].p = std::nan("");
    CHECK_THROWS_AS(s.check_structure(), ValidationError);
    s = fixture_two_type();
    s.offspring[0].atoms[0].p += 1e-9;
    CHECK_THROWS_AS(s.check_structure(), ValidationError);
    s = fixture_two_type();
    s.alpha[1] = 0.0;
    CHECK_THROWS_AS(s.check_structure(), ValidationError);
}

TEST_CASE("offspring pgf") {
    ModelSpec bf = fixture_binary_fission();
    CHECK(pgf_offspring(bf, 0, {0.5}) == doctest::Approx(0.25));
    ModelSpec s = spec_of({1, 1, 1}, {{{{2, 1, 3}, 1.0}}, {{{0, 0, 0}, 1.0}}, {{{0, 0, 0}, 1.0}}});
    std::vector<double> r{0.3, 0.7, 0.9};
    CHECK(pgf_offspring(s, 0, r) == doctest::Approx(0.09 * 0.7 * 0.729).epsilon(1e-14));
    ModelSpec a = fixture_two_type();
    for (int i = 0; i < 2; ++i) {
        CHECK(pgf_offspring(a, i, {1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
        auto g = pgf_offspring_grad(a, i, {1.0, 1.0});
        MeanMatrixData mm = mean_matrix(a);
        for (int j = 0; j < 2; ++j) CHECK(std::abs(g[j] - mm.M(i, j)) <= 1e-12);
    }
}

TEST_CASE("explosion criterion integral") {
    CHECK(savits_check(fixture_two_type()).status == SavitsStatus::not_applicable);
    SavitsResult div = savits_integral([](double s) { return s * s; }, 1e-8);
    CHECK(div.integral == SavitsStatus::fails);
    SavitsResult fin = savits_integral([](double s) { return s * s / 2; }, 1e-8);
    CHECK(fin.integral == SavitsStatus::holds);
    // Antiderivative of 1/(s - s^2/2) is log(s/(2-s)); on [1/2, 1) that gives log 3.
    CHECK(fin.value == doctest::Approx(std::log(3.0)).epsilon(1e-6));
}

TEST_CASE("Perron weights resolve and are positive") {
    ModelSpec s = fixture_two_type();
    CHECK(s.xi_perron);
    double sum = 0.0;
    for (double x : s.xi) {
        CHECK(x > 0.0);
        sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.hash() == fixture_two_type().hash());
    ModelSpec t = fixture_two_type();
    t.alpha[0] = 1.0000001;
    CHECK(s.hash() != t.hash());
}
