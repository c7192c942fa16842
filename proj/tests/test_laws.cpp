#include <algorithm>
#include <map>
#include <tuple>

#include <boost/math/quadrature/gauss.hpp>

#include "doctest.h"
#include "mbgw/laws.hpp"
#include "support.hpp"

using namespace mbgw;
using namespace mbgw::test;
using G20 = boost::math::quadrature::gauss<double, 20>;

namespace {

GenFunOptions tight() {
    GenFunOptions o;
    o.ode_rtol = 1e-12;
    o.ode_atol = 1e-14;
    return o;
}

// Every labelled split structure of [3]: one three-way split, or a pair then
// its split. The parent types of the splits are free.
struct Structure {
    ColouredPartition P1, P2;
    bool two = false;
};

std::vector<Structure> structures_k3(int d) {
    std::vector<Structure> out;
    for (const auto& P : enumerate_coloured_partitions(3, d)) {
        if (P.num_blocks() == 3) out.push_back({P, {}, false});
        if (P.num_blocks() != 2) continue;
        for (const auto& b : P.blocks()) {
            if (b.members.size() != 2) continue;
            for (int c1 = 0; c1 < d; ++c1)
                for (int c2 = 0; c2 < d; ++c2)
                    out.push_back({P, ColouredPartition({{{b.members[0]}, c1}, {{b.members[1]}, c2}}), true});
        }
    }
    return out;
}

bool fits(const ColouredPartition& P, const Counts& l) {
    auto g = P.g(static_cast<int>(l.size()));
    for (std::size_t m = 0; m < l.size(); ++m)
        if (g[m] > l[m]) return false;
    return true;
}

// Mass of a two-split record over 0 < t1 < t2 < T.
double two_split_mass(const QContext& ctx, SplitRecord rec) {
    const double T = rec.T;
    return G20::integrate(
        [&](double t1) {
            return G20::integrate(
                [&](double t2) {
                    rec.splits[0].t = t1;
                    rec.splits[1].t = t2;
                    return q_joint_split_density(ctx, rec);
                },
                t1, T);
        },
        0.0, T);
}

}  // namespace

TEST_CASE("tail laws: continuity at 0 and single-type form") {
    ModelSpec bf = fixture_binary_fission(1.0);
    GenFunEngine eng(bf, tight());
    const double T = 1.0, th = 0.4, s = std::exp(-th);
    DirectTerms terms(eng, T, Ray::from_theta({th}), 3);
    QContext ctx{&bf, &terms, 0};
    CHECK(q_no_split_tail(ctx, 3, 1e-9, 0).first == doctest::Approx(1.0).epsilon(1e-7));
    for (double t : {0.2, 0.6}) {
        double want = terms.D(T - t, 3, 0) / terms.D(T, 3, 0) * bf_dF(1.0, T, s) / bf_dF(1.0, T - t, s);
        CHECK(rel(q_no_split_tail(ctx, 3, t, 0).second, want) <= 1e-8);
    }
    CHECK_THROWS_AS(q_no_split_tail(ctx, 3, 0.0, 0), ValidationError);
    CHECK_THROWS_AS(q_no_split_tail(ctx, 3, T, 0), ValidationError);
}

TEST_CASE("offspring law at a birth off the spine") {
    ModelSpec bf = fixture_binary_fission();
    GenFunEngine e1(bf);
    DirectTerms t1(e1, 1.0, Ray::from_theta({0.3}), 1);
    QContext c1{&bf, &t1, 0};
    CHECK(q_first_birth_offspring(c1, 0.4, 0, {2}) == doctest::Approx(1.0));

    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A);
    MeanMatrixData mm = mean_matrix(A);
    DirectTerms t0(eng, 1.0, Ray::from_theta({0.0, 0.0}), 2);
    QContext c0{&A, &t0, 1};
    for (int i = 0; i < 2; ++i) {
        double sum = 0.0;
        for (const auto& a : A.offspring[1].atoms) {
            if (a.counts[i] == 0) continue;
            double q = q_first_birth_offspring(c0, 0.5, i, a.counts);
            CHECK(q == doctest::Approx(a.counts[i] * a.p / mm.M(1, i)).epsilon(1e-10));
            sum += q;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("birth off the spine: single-type closed form") {
    const double a = 1.3, T = 1.0, th = 0.7, s = std::exp(-th);
    ModelSpec bf = fixture_binary_fission(a);
    GenFunEngine eng(bf, tight());
    DirectTerms terms(eng, T, Ray::from_theta({th}), 1);
    QContext ctx{&bf, &terms, 0};
    for (double t : {0.1, 0.5, 0.9}) {
        double u = T - t;
        double want = a * std::exp(-a * t) * 2 * bf_F(a, u, s) * bf_dF(a, u, s) / bf_dF(a, T, s);
        CHECK(rel(q_birth_off_spine_joint(ctx, 1, t, 0), want) <= 1e-8);
    }
}

TEST_CASE("first split: single-type closed form for two marks") {
    const double a = 0.8, T = 1.2, th = 0.3, s = std::exp(-th);
    ModelSpec bf = fixture_binary_fission(a);
    GenFunEngine eng(bf, tight());
    DirectTerms terms(eng, T, Ray::from_theta({th}), 2);
    QContext ctx{&bf, &terms, 0};
    ColouredPartition P({{{1}, 0}, {{2}, 0}});
    for (double t : {0.15, 0.6, 1.0}) {
        double u = T - t;
        double want = 2 * a * bf_dF(a, t, bf_F(a, u, s)) * std::pow(bf_dF(a, u, s), 2) / bf_d2F(a, T, s);
        CHECK(rel(q_first_split_density(ctx, 2, t, P, {2}, 0), want) <= 1e-8);
    }
}

TEST_CASE("first split densities: one-split records and profile sums") {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A);
    DirectTerms terms(eng, 1.0, Ray::from_theta({0.2, 0.5}), 3);
    QContext ctx{&A, &terms, 1};
    std::map<std::tuple<BlockSizeProfile, Counts, int>, double> sums;
    const double t = 0.45;
    for (const auto& P : enumerate_coloured_partitions(3, 2)) {
        if (P.num_blocks() < 2) continue;
        for (int i = 0; i < 2; ++i)
            for (const auto& at : A.offspring[i].atoms) {
                double f = q_first_split_density(ctx, 3, t, P, at.counts, i);
                if (!fits(P, at.counts)) {
                    CHECK(f == 0.0);
                    continue;
                }
                SplitRecord rec{3, 1, 1.0, {SplitEvent{t, i, at.counts, P, {1, 2, 3}}}};
                CHECK(std::abs(q_joint_split_density(ctx, rec) - f) <= 1e-12 * std::max(1.0, f));
                sums[{profile_of(P, 2), at.counts, i}] += f;
            }
    }
    for (const auto& [key, v] : sums) {
        const auto& [prof, l, i] = key;
        CHECK(std::abs(v - q_first_split_profile_density(ctx, 3, t, prof, l, i)) <= 1e-12 * std::max(1.0, v));
    }
    // The first-event split density sums the same terms at the root.
    double total = 0.0;
    for (const auto& P : enumerate_coloured_partitions(3, 2)) {
        if (P.num_blocks() < 2) continue;
        for (const auto& at : A.offspring[1].atoms) {
            double v = q_first_split_density(ctx, 3, t, P, at.counts, 1);
            total += v / ctx.terms->mixed(t)(1, 1) * std::exp(-A.alpha[1] * t);
        }
    }
    CHECK(rel(q_first_event_split_density(ctx, 3, t), total) <= 1e-10);
}

TEST_CASE("joint law over all three-mark structures integrates to one") {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A, tight());
    const double T = 1.0;
    TableTerms terms(eng, T, Ray::from_theta({0.1, 0.1}), 3, 2048);
    QContext ctx{&A, &terms, 0};
    double total = 0.0;
    for (const auto& st : structures_k3(2))
        for (int i1 = 0; i1 < 2; ++i1)
            for (const auto& a1 : A.offspring[i1].atoms) {
                if (!fits(st.P1, a1.counts)) continue;
                SplitRecord rec{3, 0, T, {SplitEvent{0.0, i1, a1.counts, st.P1, {1, 2, 3}}}};
                if (!st.two) {
                    total += G20::integrate(
                        [&](double t) {
                            rec.splits[0].t = t;
                            return q_joint_split_density(ctx, rec);
                        },
                        0.0, T);
                    continue;
                }
                for (int i2 = 0; i2 < 2; ++i2)
                    for (const auto& a2 : A.offspring[i2].atoms) {
                        if (!fits(st.P2, a2.counts)) continue;
                        rec.splits.resize(1);
                        rec.splits.push_back(SplitEvent{0.0, i2, a2.counts, st.P2, st.P2.members()});
                        total += two_split_mass(ctx, rec);
                    }
            }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("joint law of two successive splits against simulation") {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A, tight());
    const double T = 1.0;
    const Vec th{0.1, 0.1};
    TableTerms terms(eng, T, Ray::from_theta(th), 3, 2048);
    QContext ctx{&A, &terms, 0};
    std::map<std::string, double> expected;
    for (const auto& st : structures_k3(2)) {
        if (!st.two) continue;
        std::string key = st.P1.text() + " then " + st.P2.text();
        for (int i1 = 0; i1 < 2; ++i1)
            for (int i2 = 0; i2 < 2; ++i2)
                for (const auto& a1 : A.offspring[i1].atoms)
                    for (const auto& a2 : A.offspring[i2].atoms) {
                        if (!fits(st.P1, a1.counts) || !fits(st.P2, a2.counts)) continue;
                        expected[key] += two_split_mass(
                            ctx, SplitRecord{3, 0, T,
                                             {SplitEvent{0.0, i1, a1.counts, st.P1, {1, 2, 3}},
                                              SplitEvent{0.0, i2, a2.counts, st.P2, st.P2.members()}}});
                    }
    }
    QSimOptions opt;
    opt.marked_only = true;
    QSimulator sim(eng, 0, 3, T, th, opt);
    const long n = 100000;
    std::map<std::string, long> counts;
    for (long i = 0; i < n; ++i) {
        QRun run = sim.run(replicate_seed(41, i));
        SplitRecord rec = run.record(0, T);
        if (rec.n() == 2) counts[rec.splits[0].P.text() + " then " + rec.splits[1].P.text()]++;
    }
    std::vector<std::pair<double, std::string>> top;
    for (const auto& [k, v] : expected) top.emplace_back(v, k);
    std::sort(top.rbegin(), top.rend());
    top.resize(12);
    std::vector<std::string> labels;
    std::vector<double> exp;
    std::vector<long> obs;
    for (const auto& [v, k] : top) {
        labels.push_back(k);
        exp.push_back(v);
        obs.push_back(counts[k]);
    }
    ComparisonReport rep = mc_compare(labels, exp, obs, n);
    CHECK(rep.pass);
}

TEST_CASE("uniform-sampling law: Beta mass and normalisation") {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A, tight());
    const double T = 1.0;
    QuadratureSpec q;
    q.rel_tol = 1e-12;
    for (int k : {1, 2, 3}) CHECK(std::abs(punif_beta_mass(eng, T, 0, k, q).value - 1.0) <= 1e-10);
    SplitRecord none{1, 0, T, {}};
    CHECK(punif_joint_split_density(eng, T, 0, none, q).value == 1.0);

    GenFunEngine loose(A);
    const double surv = loose.survival_ge_k(T, 0, 2);
    QuadratureSpec q2;
    q2.rel_tol = 1e-6;
    double total = 0.0;
    for (const auto& P : enumerate_coloured_partitions(2, 2)) {
        if (P.num_blocks() != 2) continue;
        for (int i = 0; i < 2; ++i)
            for (const auto& at : A.offspring[i].atoms) {
                auto g = P.g(2);
                if (g[0] > at.counts[0] || g[1] > at.counts[1]) continue;
                SplitRecord rec{2, 0, T, {SplitEvent{0.0, i, at.counts, P, {1, 2}}}};
                total += G20::integrate(
                    [&](double t) {
                        rec.splits[0].t = t;
                        return punif_joint_split_density(loose, T, 0, rec, q2, surv).value;
                    },
                    0.0, T);
            }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("malformed records are rejected") {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A);
    DirectTerms terms(eng, 1.0, Ray::from_theta({0.1, 0.1}), 2);
    QContext ctx{&A, &terms, 0};
    ColouredPartition P({{{1}, 0}, {{2}, 1}});
    SplitRecord late{2, 0, 1.0, {SplitEvent{1.5, 0, {1, 1}, P, {1, 2}}}};
    CHECK_THROWS_AS(q_joint_split_density(ctx, late), ValidationError);
    SplitRecord wrong_root{2, 1, 1.0, {SplitEvent{0.5, 0, {1, 1}, P, {1, 2}}}};
    CHECK_THROWS_AS(q_joint_split_density(ctx, wrong_root), ValidationError);
    CHECK_THROWS_AS(q_first_split_density(ctx, 2, 0.5, ColouredPartition({{{1, 2}, 0}}), {1, 1}, 0),
                    ValidationError);
    // Outside the offspring support the density is zero.
    CHECK(q_first_split_density(ctx, 2, 0.5, P, {5, 5}, 0) == 0.0);
}
