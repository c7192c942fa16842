#include <map>
#include <set>

#include "doctest.h"
#include "support.hpp"

using namespace mbgw;
using mbgw::test::spec_of;

namespace {

ColouredPartition fig1_partition() {
    // Colour sizes (1,3), (1), (2,1) over eight marks.
    return ColouredPartition({{{1}, 0}, {{2, 3, 4}, 0}, {{5}, 1}, {{6, 7}, 2}, {{8}, 2}});
}

// Brute force: every map from marks to the children of an l-offspring vector,
// weighted by xi of the child's type; returns the mass realising P.
double urn_brute(const std::vector<double>& xi, const Counts& l, const ColouredPartition& P) {
    std::vector<int> child_type;
    for (std::size_t m = 0; m < l.size(); ++m)
        for (int c = 0; c < l[m]; ++c) child_type.push_back(static_cast<int>(m));
    double tot = 0.0;
    for (int t : child_type) tot += xi[t];
    const int k = P.num_marks();
    const int n = static_cast<int>(child_type.size());
    std::vector<int> a(k, 0);
    double mass = 0.0;
    for (;;) {
        double w = 1.0;
        for (int x : a) w *= xi[child_type[x]] / tot;
        // Induced coloured partition.
        std::map<int, std::vector<int>> by_child;
        for (int h = 0; h < k; ++h) by_child[a[h]].push_back(h + 1);
        std::vector<Block> blocks;
        for (auto& [c, mem] : by_child) blocks.push_back(Block{mem, child_type[c]});
        std::sort(blocks.begin(), blocks.end(), [](const Block& x, const Block& y) { return x.members[0] < y.members[0]; });
        if (ColouredPartition(blocks) == P) mass += w;
        int q = 0;
        while (q < k && ++a[q] == n) a[q++] = 0;
        if (q == k) break;
    }
    return mass;
}

// Stirling-type recursion for the number of set partitions of [k] (Bell numbers).
long bell(int k) {
    std::vector<std::vector<long>> S(k + 1, std::vector<long>(k + 1, 0));
    S[0][0] = 1;
    for (int n = 1; n <= k; ++n)
        for (int b = 1; b <= n; ++b) S[n][b] = b * S[n - 1][b] + S[n - 1][b - 1];
    long s = 0;
    for (int b = 0; b <= k; ++b) s += S[k][b];
    return s;
}

}  // namespace

TEST_CASE("falling factorials") {
    CHECK(falling_factorial(5, 2) == 20);
    CHECK(falling_factorial(3, 5) == 0);
    CHECK(falling_factorial(7, 0) == 1);
    CHECK(falling_factorial_d(5.0, 2) == 20.0);
    CHECK(vector_falling({2, 1, 3}, {2, 1, 2}) == 12);
    CHECK(vector_falling({2, 1, 3}, {0, 0, 0}) == 1);
    CHECK(vector_falling({1, 0}, {2, 0}) == 0);
}

TEST_CASE("partition text form round trips") {
    ColouredPartition P = ColouredPartition::parse("{1,3,4}:1|{2,5,6}:3");
    CHECK(P.text() == "{1,3,4}:1|{2,5,6}:3");
    CHECK(P.num_blocks() == 2);
    CHECK(P.g(3) == std::vector<int>{1, 0, 1});
    CHECK(P.abar(3) == std::vector<int>{3, 0, 3});
    CHECK_THROWS_AS(ColouredPartition::parse("{1,2}:1|{2}:1"), ValidationError);
    CHECK_THROWS_AS(ColouredPartition::parse("{1,2:1"), ValidationError);
    CHECK(fig1_partition().text() == "{1}:1|{2,3,4}:1|{5}:2|{6,7}:3|{8}:3");
}

TEST_CASE("urn probabilities: small cases") {
    ModelSpec one = spec_of({1.0}, {{{{1}, 1.0}}});
    ColouredPartition all({{{1, 2, 3}, 0}});
    CHECK(urn_assignment_probability(one, {1}, all).value == doctest::Approx(1.0));
    ModelSpec two = spec_of({1.0}, {{{{2}, 1.0}}});
    ColouredPartition split({{{1}, 0}, {{2}, 0}});
    CHECK(urn_assignment_probability(two, {2}, split).value == doctest::Approx(0.5));
    CHECK(urn_assignment_probability(two, {1}, split).impossible);
}

TEST_CASE("urn probability of the eight-mark configuration") {
    ModelSpec s = spec_of({1, 1, 1}, {{{{0, 0, 0}, 1.0}}, {{{0, 0, 0}, 1.0}}, {{{0, 0, 0}, 1.0}}});
    ColouredPartition P = fig1_partition();
    double want = 12.0 / std::pow(6.0, 8);
    CHECK(urn_assignment_probability(s, {2, 1, 3}, P).value == doctest::Approx(want).epsilon(1e-13));
    CHECK(urn_brute(s.xi, {2, 1, 3}, P) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("urn probabilities agree with brute force for unequal weights") {
    ModelSpec s = spec_of({1, 1}, {{{{0, 0}, 1.0}}, {{{0, 0}, 1.0}}}, {0.3, 0.7});
    for (const Counts& l : {Counts{2, 1}, Counts{1, 2}, Counts{3, 0}})
        for (const auto& P : enumerate_coloured_partitions(3, 2)) {
            auto u = urn_assignment_probability(s, l, P);
            double b = urn_brute(s.xi, l, P);
            CHECK((u.impossible ? 0.0 : u.value) == doctest::Approx(b).epsilon(1e-12));
        }
}

TEST_CASE("partition counts") {
    BlockSizeProfile fig1{{{3, 1}, {1}, {2, 1}}};
    CHECK(count_partitions_with_profile(8, fig1) == 3360);
    CHECK(enumerate_coloured_partitions(8, 3, &fig1).size() == 3360);
    CHECK(count_partitions_with_profile(2, BlockSizeProfile{{{2}}}) == 1);
    CHECK(count_partitions_with_profile(3, BlockSizeProfile{{{1, 1, 1}}}) == 1);
    CHECK(enumerate_coloured_partitions(1, 2).size() == 2);
    CHECK(enumerate_coloured_partitions(2, 1).size() == 2);
    for (int k = 1; k <= 7; ++k) CHECK(static_cast<long>(enumerate_coloured_partitions(k, 1).size()) == bell(k));
}

TEST_CASE("enumerated partitions are distinct and cover [k]") {
    auto parts = enumerate_coloured_partitions(5, 2);
    std::set<std::string> seen;
    for (const auto& P : parts) {
        CHECK(P.members() == std::vector<int>{1, 2, 3, 4, 5});
        seen.insert(P.text());
    }
    CHECK(seen.size() == parts.size());
}

TEST_CASE("prefactor identity on a sample profile") {
    BlockSizeProfile fig1{{{3, 1}, {1}, {2, 1}}};
    CHECK(corollary_prefactor(8, {2, 1, 3}, fig1) == proposition_prefactor(8, {2, 1, 3}, fig1));
    CHECK(proposition_prefactor(8, {2, 1, 3}, fig1) == Rational(3360 * 12));
}
