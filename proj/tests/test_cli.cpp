#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "mbgw/io.hpp"

namespace fs = std::filesystem;
using mbgw::io::json;

namespace {

struct Invocation {
    int code = -1;
    std::string out, err;
};

Invocation call(std::vector<std::string> args) {
    args.insert(args.begin(), "mbgw");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Invocation r;
    r.code = mbgw::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("mbgw_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string model_path() { return std::string(MBGW_SOURCE_DIR) + "/fixtures/two_type.json"; }

fs::path write_config(const fs::path& dir, json cfg) {
    fs::path p = dir / "config.json";
    mbgw::io::write_text(p.string(), cfg.dump());
    return p;
}

}  // namespace

TEST_CASE("validate prints a report") {
    Invocation r = call({"--model", model_path(), "validate"});
    CHECK(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["classification"] == "supercritical");
}

TEST_CASE("usage and validation exit codes") {
    CHECK(call({}).code == mbgw::cli::usage);
    CHECK(call({"--model", model_path(), "--suite", "nope", "verify"}).code == mbgw::cli::usage);
    fs::path dir = scratch("keys");
    fs::path cfg = write_config(dir, {{"model", model_path()}, {"T", 1.0}, {"bogus", 1}});
    CHECK(call({"--config", cfg.string(), "simulate"}).code == mbgw::cli::validation);
    CHECK(call({"--model", (dir / "missing.json").string(), "validate"}).code == mbgw::cli::validation);
}

TEST_CASE("simulate is reproducible and writes a manifest") {
    fs::path dir = scratch("simulate");
    fs::path cfg = write_config(dir, {{"model", model_path()}, {"T", 1.0}, {"seed", 5}, {"replicates", 3}});
    REQUIRE(call({"--config", cfg.string(), "--out", (dir / "a").string(), "simulate"}).code == 0);
    REQUIRE(call({"--config", cfg.string(), "--out", (dir / "b").string(), "simulate"}).code == 0);
    json m = json::parse(mbgw::io::read_text((dir / "a" / "manifest.json").string()));
    REQUIRE(m["files"].size() == 3);
    CHECK(m["replicate_seeds"].size() == 3);
    CHECK(m["command"] == "simulate");
    for (const auto& f : m["files"]) {
        std::string name = fs::path(f.get<std::string>()).filename().string();
        CHECK(mbgw::io::read_text((dir / "a" / name).string()) == mbgw::io::read_text((dir / "b" / name).string()));
    }
    REQUIRE(call({"--config", cfg.string(), "--seed", "6", "--out", (dir / "c").string(), "simulate"}).code == 0);
    CHECK(mbgw::io::read_text((dir / "a" / "log_000000.jsonl").string()) !=
          mbgw::io::read_text((dir / "c" / "log_000000.jsonl").string()));
}

TEST_CASE("genealogy with one mark has no splits") {
    fs::path dir = scratch("genealogy");
    fs::path cfg = write_config(dir, {{"model", model_path()}, {"T", 1.0}, {"k", 1}, {"replicates", 2}});
    REQUIRE(call({"--config", cfg.string(), "--out", dir.string(), "genealogy"}).code == 0);
    json g = json::parse(mbgw::io::read_text((dir / "genealogy_000000.json").string()));
    CHECK(g["record"]["splits"].empty());
}

TEST_CASE("density of a one-split record") {
    fs::path dir = scratch("density");
    json rec = {{"k", 2}, {"root_type", 1}, {"T", 1.0},
                {"splits", {{{"t", 0.4}, {"parent_type", 1}, {"l", {1, 1}}, {"P", "{1}:1|{2}:2"}}}}};
    fs::path cfg = write_config(dir, {{"model", model_path()}, {"T", 1.0}, {"k", 2}, {"theta", 0.1}, {"record", rec}});
    Invocation r = call({"--config", cfg.string(), "density"});
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["value"].get<double>() > 0.0);
}

TEST_CASE("identity suite passes through verify") {
    fs::path dir = scratch("verify");
    Invocation r = call({"--model", model_path(), "--suite", "identity", "--out", dir.string(), "verify"});
    CHECK(r.code == 0);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "report.csv"));
}
