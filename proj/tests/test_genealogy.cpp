#include "doctest.h"
#include "support.hpp"

using namespace mbgw;

namespace {

// Three types, root of type 2, six sampled individuals; built by hand.
struct Fig2 {
    EventLog log;
    std::vector<int> sample;
};

Fig2 fig2_tree() {
    Fig2 f;
    EventLog& L = f.log;
    L.T = 1.0;
    L.root_type = 1;
    Node root;
    root.type = 1;
    L.nodes.push_back(root);
    auto id = [&](const char* lab) { return L.find(UlamHarrisLabel::parse(lab)); };
    L.add_event(0.2, id(""), {1, 0, 1});      // "1" type 1, "2" type 3
    L.add_event(0.4, id("1"), {1, 2, 0});     // "1.1" type 1, "1.2" "1.3" type 2
    L.add_event(0.5, id("1.2"), {0, 1, 0});   // colour-preserving relay
    L.add_event(0.6, id("2"), {0, 1, 1});     // "2.1" type 2, "2.2" type 3
    L.add_event(0.8, id("2.2"), {0, 0, 2});   // "2.2.1", "2.2.2" type 3
    L.add_event(0.9, id("1.1"), {0, 1, 0});   // colour change of mark 1
    f.sample = {id("1.1.1"), id("2.2.1"), id("1.2.1"), id("1.3"), id("2.2.2"), id("2.1")};
    return f;
}

double lcp_time(const EventLog& log, int a, int b) {
    // Death time of the last common ancestor, from label prefixes.
    auto la = log.label(a).path, lb = log.label(b).path;
    std::size_t n = 0;
    while (n < la.size() && n < lb.size() && la[n] == lb[n]) ++n;
    UlamHarrisLabel common;
    common.path.assign(la.begin(), la.begin() + n);
    return log.nodes[log.find(common)].death;
}

}  // namespace

TEST_CASE("six-mark three-type fixture reproduces its coloured subsequence") {
    Fig2 f = fig2_tree();
    AncestralPath path = ancestral_process(f.log, f.sample);
    CHECK(path.initial.text() == "{1,2,3,4,5,6}:2");
    CHECK(path.at(0.3).text() == "{1,3,4}:1|{2,5,6}:3");
    CHECK(path.at(0.45).text() == "{1}:1|{2,5,6}:3|{3}:2|{4}:2");
    SplitRecord rec = split_record(path, f.log);
    REQUIRE(rec.n() == 4);
    auto seq = coloured_subsequence(rec);
    REQUIRE(seq.size() == 5);
    CHECK(seq[0].text() == "{1,2,3,4,5,6}:2");
    CHECK(seq[1].text() == "{1,3,4}:1|{2,5,6}:3");
    CHECK(seq[2].text() == "{1}:1|{3}:2|{4}:2");
    CHECK(seq[3].text() == "{2,5}:3|{6}:2");
    CHECK(seq[4].text() == "{2}:3|{5}:3");
    CHECK(path.split_count() == 4);
    CHECK(path.at(1.0 - 1e-9).text() == "{1}:2|{2}:3|{3}:2|{4}:2|{5}:3|{6}:2");
    // Colour changes appear as breakpoints without refinement.
    int colour_changes = 0;
    for (const auto& b : path.breaks) colour_changes += b.kind == BreakKind::colour_change;
    CHECK(colour_changes == 1);
    rec.check(3, true);
    CHECK(rec.splits[0].l == Counts{1, 0, 1});
    CHECK(rec.splits[0].parent_type == 1);
}

TEST_CASE("single mark has no splits") {
    ModelSpec s = fixture_two_type();
    for (std::uint64_t q = 0; q < 50; ++q) {
        EventLog log = simulate(s, 0, 1.5, replicate_seed(21, q));
        if (log.alive_sorted(1.5).empty()) continue;
        auto sample = uniform_sample(log, 1, q);
        AncestralPath p = ancestral_process(log, sample);
        CHECK(p.split_count() == 0);
        SplitRecord rec = split_record(p, log);
        CHECK(rec.n() == 0);
        for (const auto& b : p.breaks) CHECK(b.kind == BreakKind::colour_change);
    }
}

TEST_CASE("two children of the root separate at the root's death") {
    EventLog L;
    L.T = 1.0;
    Node root;
    L.nodes.push_back(root);
    L.add_event(0.37, 0, {2});
    AncestralPath p = ancestral_process(L, {1, 2});
    CHECK(p.separation_time(1, 2) == doctest::Approx(0.37));
    Topology top = topology(p, 1);
    REQUIRE(top.uncoloured.size() == 2);
    CHECK(top.uncoloured[0] == std::vector<std::vector<int>>{{1, 2}});
    CHECK(top.uncoloured[1] == std::vector<std::vector<int>>{{1}, {2}});
}

TEST_CASE("pairwise separation times match label prefixes") {
    ModelSpec s = fixture_two_type();
    int checked = 0;
    for (std::uint64_t q = 0; q < 200 && checked < 40; ++q) {
        EventLog log = simulate(s, 0, 1.5, replicate_seed(31, q));
        auto alive = log.alive_sorted(1.5);
        if (alive.size() < 5) continue;
        auto sample = uniform_sample(log, 5, q);
        AncestralPath p = ancestral_process(log, sample);
        for (int a = 1; a <= 5; ++a)
            for (int b = a + 1; b <= 5; ++b)
                CHECK(p.separation_time(a, b) == lcp_time(log, sample[a - 1], sample[b - 1]));
        SplitRecord rec = split_record(p, log);
        rec.check(2, true);
        // Replay: refining block by block ends in k singletons.
        std::vector<std::vector<int>> blocks{{1, 2, 3, 4, 5}};
        for (const auto& sp : rec.splits) {
            auto it = std::find(blocks.begin(), blocks.end(), sp.parent_block);
            REQUIRE(it != blocks.end());
            blocks.erase(it);
            for (const auto& b : sp.P.blocks()) blocks.push_back(b.members);
        }
        CHECK(blocks.size() == 5);
        // Net block creation: sum over splits of (blocks - 1) is k - 1.
        int net = 0;
        for (const auto& sp : rec.splits) net += sp.P.num_blocks() - 1;
        CHECK(net == 4);
        Topology top = topology(p, 2);
        CHECK(top.coloured.front().num_blocks() == 1);
        CHECK(top.coloured.back().num_blocks() == 5);
        ++checked;
    }
    CHECK(checked >= 20);
}
