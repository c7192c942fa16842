#include <filesystem>

#include "doctest.h"
#include "mbgw/io.hpp"
#include "mbgw/treesim.hpp"
#include "support.hpp"

using namespace mbgw;
using namespace mbgw::io;

namespace {
std::string fixture_path(const std::string& name) { return std::string(MBGW_SOURCE_DIR) + "/fixtures/" + name; }
}  // namespace

TEST_CASE("exact rationals") {
    CHECK(parse_rational("0.25") == Rational(1, 4));
    CHECK(parse_rational("1/3") == Rational(1, 3));
    CHECK(parse_rational("2.5e-1") == Rational(1, 4));
    CHECK(parse_rational("007/14") == Rational(1, 2));
    CHECK(parse_rational("1") == Rational(1));
    CHECK_THROWS_AS(parse_rational("abc"), ValidationError);
    CHECK_THROWS_AS(parse_rational("1/0"), ValidationError);
}

TEST_CASE("model parsing errors") {
    json good = json::parse(R"({"d":1,"alpha":[1.0],"offspring":[[{"counts":[0],"p":"1/2"},{"counts":[2],"p":"1/2"}]],"xi":"perron"})");
    CHECK(parse_model(good).d == 1);
    json bad = good;
    bad["alpha"] = {-1.0};
    CHECK_THROWS_AS(parse_model(bad), ValidationError);
    bad = good;
    bad["colour"] = 3;
    CHECK_THROWS_AS(parse_model(bad), ValidationError);
    bad = good;
    bad["offspring"][0][1]["p"] = "1/3";
    CHECK_THROWS_AS(parse_model(bad), ValidationError);
    bad = good;
    bad["offspring"][0][1]["counts"] = {1, 1};
    CHECK_THROWS_AS(parse_model(bad), ValidationError);
    bad = good;
    bad["offspring"][0][0]["p"] = -0.5;
    CHECK_THROWS_AS(parse_model(bad), ValidationError);
    try {
        bad = good;
        bad["offspring"][0][1]["p"] = "x";
        parse_model(bad);
        FAIL("accepted");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("offspring") != std::string::npos);
    }
}

TEST_CASE("fixture files match the built-in fixtures") {
    CHECK(load_model(fixture_path("two_type.json")).hash() == fixture_two_type().hash());
    CHECK(load_model(fixture_path("subcritical.json")).hash() == fixture_subcritical().hash());
    CHECK(load_model(fixture_path("critical.json")).hash() == fixture_critical().hash());
    CHECK(load_model(fixture_path("binary_fission.json")).hash() == fixture_binary_fission().hash());
    CHECK(load_model(fixture_path("single_type.json")).hash() == fixture_single_type().hash());
    CHECK(load_model(fixture_path("pure_death.json")).hash() == fixture_pure_death().hash());
    ModelSpec A = fixture_two_type();
    CHECK(parse_model(model_to_json(A)).hash() == A.hash());
}

TEST_CASE("event log round trip") {
    ModelSpec A = fixture_two_type();
    EventLog log = simulate(A, 1, 1.5, 77);
    EventLog back = parse_event_log_jsonl(event_log_jsonl(log));
    CHECK(back.T == log.T);
    CHECK(back.root_type == log.root_type);
    CHECK(back.seed == log.seed);
    REQUIRE(back.events.size() == log.events.size());
    REQUIRE(back.nodes.size() == log.nodes.size());
    for (std::size_t e = 0; e < log.events.size(); ++e) {
        CHECK(back.events[e].t == log.events[e].t);
        CHECK(back.events[e].parent == log.events[e].parent);
        CHECK(back.events[e].counts == log.events[e].counts);
    }
    CHECK(event_log_jsonl(back) == event_log_jsonl(log));
}

TEST_CASE("split record round trip") {
    ModelSpec A = fixture_two_type();
    SplitRecord rec{3, 1, 1.0,
                    {SplitEvent{0.25, 1, {1, 1}, ColouredPartition::parse("{1,3}:1|{2}:2"), {1, 2, 3}},
                     SplitEvent{0.5, 0, {2, 0}, ColouredPartition::parse("{1}:1|{3}:1"), {1, 3}}}};
    SplitRecord back = record_from_json(record_to_json(rec), 2);
    CHECK(back.k == 3);
    CHECK(back.root_type == 1);
    REQUIRE(back.n() == 2);
    for (int h = 0; h < 2; ++h) {
        CHECK(back.splits[h].t == rec.splits[h].t);
        CHECK(back.splits[h].parent_type == rec.splits[h].parent_type);
        CHECK(back.splits[h].l == rec.splits[h].l);
        CHECK(back.splits[h].P == rec.splits[h].P);
        CHECK(back.splits[h].parent_block == rec.splits[h].parent_block);
    }
}

TEST_CASE("report serialisation") {
    CriterionResult r{"A9", "urn", true, "exact", {{"max_err", 0.0}}, 0.1};
    json j = result_to_json(r);
    CHECK(j["id"] == "A9");
    CHECK(j["pass"] == true);
    std::string csv = results_csv({r});
    CHECK(csv.find("A9") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}
