#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "mbgw/io.hpp"
#include "mbgw/laws.hpp"

#ifndef MBGW_VERSION
#define MBGW_VERSION "0.0.0"
#endif

namespace mbgw::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Effective run configuration: config file, then environment, then flags.
struct RunConfig {
    std::optional<ModelSpec> model;
    json model_json;
    double T = 1.0;
    int k = 2;
    std::optional<Vec> theta;
    std::optional<double> s;  // s-mode: theta = -log(s) in every coordinate
    int root_type = 0;
    std::uint64_t seed = 1;
    long replicates = 1;
    int workers = 0;
    std::string out = "out";
    std::string suite = "acceptance";
    double scale = 1.0;
    std::string measure = "uniform";
    std::optional<json> record;
    double rel_tol = 1e-8;
    bool marked_only = false;
    long attempt_budget = 0;

    Vec theta_or_default(int d) const {
        if (theta && s) throw ValidationError("config: give theta or s, not both");
        if (s) {
            if (!(*s > 0.0) || *s > 1.0) throw ValidationError("config.s: must lie in (0, 1]");
            return Vec(d, -std::log(*s));
        }
        if (!theta) return Vec(d, 0.0);
        if (theta->size() == 1 && d > 1) return Vec(d, (*theta)[0]);
        if (static_cast<int>(theta->size()) != d) throw ValidationError("config.theta: expected d entries");
        return *theta;
    }
    const ModelSpec& spec() const {
        if (!model) throw ValidationError("no model given (config key \"model\" or --model)");
        return *model;
    }

    json to_json() const {
        json j{{"T", T},           {"k", k},         {"root_type", root_type + 1}, {"seed", seed},
               {"replicates", replicates}, {"workers", workers}, {"out", out},     {"suite", suite},
               {"scale", scale},   {"measure", measure}, {"rel_tol", rel_tol}, {"marked_only", marked_only},
               {"attempt_budget", attempt_budget}};
        if (model) j["model"] = model_json;
        if (theta) j["theta"] = *theta;
        if (s) j["s"] = *s;
        if (record) j["record"] = *record;
        return j;
    }
};

const std::set<std::string> kConfigKeys{"model",   "T",     "k",          "theta",       "s",
                                        "root_type", "seed", "replicates", "workers",     "out",
                                        "suite",   "scale", "measure",    "record",      "rel_tol",
                                        "marked_only", "attempt_budget"};

void load_model_into(RunConfig& cfg, const json& m, const fs::path& base) {
    if (m.is_string()) {
        fs::path p = m.get<std::string>();
        if (p.is_relative()) p = base / p;
        cfg.model_json = json::parse(io::read_text(p.string()));
    } else {
        cfg.model_json = m;
    }
    cfg.model = io::parse_model(cfg.model_json);
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    json j;
    try {
        j = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError("config: expected an object");
    for (const auto& [key, v] : j.items())
        if (!kConfigKeys.count(key)) throw ValidationError("config: unknown key \"" + key + "\"");
    auto num = [&](const char* key) {
        if (!j[key].is_number()) throw ValidationError(std::string("config.") + key + ": expected a number");
        return j[key].get<double>();
    };
    auto integer = [&](const char* key) {
        if (!j[key].is_number_integer()) throw ValidationError(std::string("config.") + key + ": expected an integer");
        return j[key].get<long>();
    };
    auto str = [&](const char* key) {
        if (!j[key].is_string()) throw ValidationError(std::string("config.") + key + ": expected a string");
        return j[key].get<std::string>();
    };
    if (j.contains("model")) load_model_into(cfg, j["model"], fs::path(path).parent_path());
    if (j.contains("T")) cfg.T = num("T");
    if (j.contains("k")) cfg.k = static_cast<int>(integer("k"));
    if (j.contains("theta")) {
        if (j["theta"].is_number())
            cfg.theta = Vec{num("theta")};
        else if (j["theta"].is_array())
            cfg.theta = j["theta"].get<Vec>();
        else
            throw ValidationError("config.theta: expected a number or an array");
    }
    if (j.contains("s")) cfg.s = num("s");
    if (j.contains("root_type")) cfg.root_type = static_cast<int>(integer("root_type")) - 1;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ValidationError("config.seed: expected an unsigned integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("replicates")) cfg.replicates = integer("replicates");
    if (j.contains("workers")) cfg.workers = static_cast<int>(integer("workers"));
    if (j.contains("out")) cfg.out = str("out");
    if (j.contains("suite")) cfg.suite = str("suite");
    if (j.contains("scale")) cfg.scale = num("scale");
    if (j.contains("measure")) cfg.measure = str("measure");
    if (j.contains("record")) cfg.record = j["record"];
    if (j.contains("rel_tol")) cfg.rel_tol = num("rel_tol");
    if (j.contains("marked_only")) {
        if (!j["marked_only"].is_boolean()) throw ValidationError("config.marked_only: expected a boolean");
        cfg.marked_only = j["marked_only"].get<bool>();
    }
    if (j.contains("attempt_budget")) cfg.attempt_budget = integer("attempt_budget");
}

void check_common(const RunConfig& cfg) {
    if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) throw ValidationError("config.T: must be positive");
    if (cfg.k < 1 || cfg.k > 8) throw ValidationError("config.k: must lie in 1..8");
    if (cfg.replicates < 1) throw ValidationError("config.replicates: must be >= 1");
    if (cfg.workers < 0) throw ValidationError("config.workers: must be >= 0");
    if (!(cfg.scale > 0.0)) throw ValidationError("config.scale: must be positive");
    if (cfg.model && (cfg.root_type < 0 || cfg.root_type >= cfg.model->d))
        throw ValidationError("config.root_type: out of range (1-based)");
}

unsigned workers_of(const RunConfig& cfg) { return cfg.workers > 0 ? cfg.workers : default_workers(); }

std::string numbered(const std::string& stem, long i, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%06ld", i);
    return stem + buf + ext;
}

void write_manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& files, json extra = json::object()) {
    json m{{"command", command},
           {"version", MBGW_VERSION},
           {"spec_hash", cfg.model ? cfg.model->hash() : ""},
           {"config", cfg.to_json()},
           {"replicate_seeds", seeds},
           {"files", files}};
    for (auto& [k, v] : extra.items()) m[k] = v;
    io::write_text((fs::path(cfg.out) / "manifest.json").string(), m.dump(2) + "\n");
}

// ------------------------------------------------------------------ commands

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
    const ModelSpec& spec = cfg.spec();
    ValidationReport rep = validate_model(spec);
    MeanMatrixData mm = mean_matrix(spec);
    json j{{"spec_hash", spec.hash()},
           {"d", spec.d},
           {"rho", mm.rho},
           {"classification", to_string(mm.classification)},
           {"xi", spec.xi},
           {"xi_perron", spec.xi_perron},
           {"non_simple", rep.non_simple},
           {"irreducible", rep.irreducible},
           {"conservative", rep.conservative},
           {"finite_mean", rep.finite_mean},
           {"savits", to_string(rep.savits.status)},
           {"hypothesis_ok", rep.hypothesis_ok()},
           {"warnings", rep.warnings}};
    out << j.dump(2) << "\n";
    return ok;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const ModelSpec& spec = cfg.spec();
    fs::create_directories(cfg.out);
    std::vector<std::uint64_t> seeds(cfg.replicates);
    std::vector<std::string> files(cfg.replicates);
    for (long i = 0; i < cfg.replicates; ++i) {
        seeds[i] = replicate_seed(cfg.seed, i);
        files[i] = numbered("log", i, ".jsonl");
    }
    parallel_map<int>(cfg.replicates, workers_of(cfg), [&](std::size_t i) {
        EventLog log = simulate(spec, cfg.root_type, cfg.T, seeds[i]);
        io::write_text((fs::path(cfg.out) / files[i]).string(), io::event_log_jsonl(log));
        return 0;
    });
    write_manifest(cfg, "simulate", seeds, files);
    out << "wrote " << cfg.replicates << " event logs to " << cfg.out << "\n";
    return ok;
}

int cmd_genealogy(const RunConfig& cfg, std::ostream& out) {
    const ModelSpec& spec = cfg.spec();
    fs::create_directories(cfg.out);
    GenFunEngine eng(spec);
    const double surv = eng.survival_ge_k(cfg.T, cfg.root_type, cfg.k);
    std::vector<std::uint64_t> seeds(cfg.replicates);
    std::vector<std::string> files(cfg.replicates);
    for (long i = 0; i < cfg.replicates; ++i) {
        seeds[i] = replicate_seed(cfg.seed, i);
        files[i] = numbered("genealogy", i, ".json");
    }
    parallel_map<int>(cfg.replicates, workers_of(cfg), [&](std::size_t i) {
        ConditionedSample cs = sample_conditioned(spec, cfg.root_type, cfg.T, cfg.k, seeds[i], cfg.attempt_budget, surv);
        auto sample = uniform_sample(cs.log, cfg.k, replicate_seed(seeds[i], 1));
        AncestralPath path = ancestral_process(cs.log, sample);
        SplitRecord rec = split_record(path, cs.log);
        std::vector<std::string> labels;
        for (int id : sample) labels.push_back(cs.log.label(id).str());
        json j{{"attempts", cs.attempts},
               {"N_T", cs.log.alive_sorted(cfg.T).size()},
               {"sample", labels},
               {"path", io::path_to_json(path)},
               {"record", io::record_to_json(rec)}};
        io::write_text((fs::path(cfg.out) / files[i]).string(), j.dump(2) + "\n");
        return 0;
    });
    write_manifest(cfg, "genealogy", seeds, files, {{"P(N_T>=k)", surv}});
    out << "wrote " << cfg.replicates << " genealogies to " << cfg.out << "\n";
    return ok;
}

int cmd_spine_sim(const RunConfig& cfg, std::ostream& out) {
    const ModelSpec& spec = cfg.spec();
    fs::create_directories(cfg.out);
    GenFunEngine eng(spec);
    QSimOptions opt;
    opt.marked_only = cfg.marked_only;
    QSimulator sim(eng, cfg.root_type, cfg.k, cfg.T, cfg.theta_or_default(spec.d), opt);
    std::vector<std::uint64_t> seeds(cfg.replicates);
    std::vector<std::string> files(cfg.replicates);
    for (long i = 0; i < cfg.replicates; ++i) {
        seeds[i] = replicate_seed(cfg.seed, i);
        files[i] = numbered("spine", i, ".jsonl");
    }
    parallel_map<int>(cfg.replicates, workers_of(cfg), [&](std::size_t i) {
        QRun run = sim.run(seeds[i]);
        std::string text = io::marked_run_jsonl(run);
        text += json{{"record", io::record_to_json(run.record(cfg.root_type, cfg.T))}}.dump() + "\n";
        io::write_text((fs::path(cfg.out) / files[i]).string(), text);
        return 0;
    });
    write_manifest(cfg, "spine-sim", seeds, files);
    out << "wrote " << cfg.replicates << " spine runs to " << cfg.out << "\n";
    return ok;
}

int cmd_density(const RunConfig& cfg, std::ostream& out) {
    const ModelSpec& spec = cfg.spec();
    if (!cfg.record) throw ValidationError("density needs a \"record\" in the config");
    SplitRecord rec = io::record_from_json(*cfg.record, spec.d);
    GenFunEngine eng(spec);
    json j{{"record", io::record_to_json(rec)}, {"measure", cfg.measure}, {"spec_hash", spec.hash()}};
    if (cfg.measure == "uniform") {
        QuadratureSpec q;
        q.rel_tol = cfg.rel_tol;
        DensityValue v = punif_joint_split_density(eng, rec.T, rec.root_type, rec, q);
        j["value"] = v.value;
        j["error_estimate"] = v.error;
    } else if (cfg.measure == "q") {
        DirectTerms terms(eng, rec.T, Ray::from_theta(cfg.theta_or_default(spec.d)), rec.k);
        QContext ctx{&spec, &terms, rec.root_type};
        j["theta"] = cfg.theta_or_default(spec.d);
        j["value"] = q_joint_split_density(ctx, rec);
        j["error_estimate"] = nullptr;
    } else {
        throw ValidationError("config.measure: expected \"uniform\" or \"q\"");
    }
    out << j.dump(2) << "\n";
    return ok;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
    AcceptanceConfig ac;
    ac.seed = cfg.seed;
    ac.workers = cfg.workers;
    ac.scale = cfg.scale;
    std::vector<CriterionResult> results;
    const auto& ids = AcceptanceSuite::ids();
    if (cfg.suite == "identity") {
        results = identity_suite(ac);
    } else if (cfg.suite == "negative-controls") {
        results = negative_controls(ac);
    } else if (cfg.suite == "acceptance" || std::find(ids.begin(), ids.end(), cfg.suite) != ids.end()) {
        AcceptanceSuite suite(ac);
        for (const auto& id : ids)
            if (cfg.suite == "acceptance" || cfg.suite == id) {
                results.push_back(suite.run(id));
                const auto& r = results.back();
                out << r.id << " " << (r.pass ? "PASS" : "FAIL") << "  " << r.title << ": " << r.summary << "\n";
                out.flush();
            }
    } else {
        throw UsageError("unknown suite \"" + cfg.suite + "\" (identity, negative-controls, acceptance, A1..A10)");
    }
    if (cfg.suite == "identity" || cfg.suite == "negative-controls")
        for (const auto& r : results)
            out << r.id << " " << (r.pass ? "PASS" : "FAIL") << "  " << r.title << ": " << r.summary << "\n";
    fs::create_directories(cfg.out);
    json rep{{"suite", cfg.suite}, {"seed", cfg.seed}, {"scale", cfg.scale}, {"version", MBGW_VERSION},
             {"results", json::array()}};
    bool all = true;
    for (const auto& r : results) {
        rep["results"].push_back(io::result_to_json(r));
        all = all && r.pass;
    }
    rep["pass"] = all;
    io::write_text((fs::path(cfg.out) / "report.json").string(), rep.dump(2) + "\n");
    io::write_text((fs::path(cfg.out) / "report.csv").string(), io::results_csv(results));
    return all ? ok : statistical;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-type branching processes: simulation, spine laws and verification", "mbgw"};
    app.set_version_flag("--version", MBGW_VERSION);
    app.require_subcommand(1);

    std::string config_path, model_path;
    std::uint64_t seed = 0;
    long replicates = 0;
    int workers = 0;
    std::string outdir, suite;
    double scale = 0.0;
    auto* o_config = app.add_option("--config", config_path, "JSON run configuration")->envname("MBGW_CONFIG");
    auto* o_model = app.add_option("--model", model_path, "JSON model file (overrides config.model)")
                        ->envname("MBGW_MODEL");
    auto* o_seed = app.add_option("--seed", seed, "master seed (u64)")->envname("MBGW_SEED");
    auto* o_reps = app.add_option("--replicates", replicates, "number of replicates")->envname("MBGW_REPLICATES");
    auto* o_workers = app.add_option("--workers", workers, "worker threads (0: all cores)")->envname("MBGW_WORKERS");
    auto* o_out = app.add_option("--out", outdir, "output directory")->envname("MBGW_OUT");
    auto* o_suite = app.add_option("--suite", suite, "verify suite name")->envname("MBGW_SUITE");
    auto* o_scale = app.add_option("--scale", scale, "Monte Carlo replicate multiplier for verify")
                        ->envname("MBGW_SCALE");
    app.fallthrough();

    std::vector<std::pair<std::string, int (*)(const RunConfig&, std::ostream&)>> commands{
        {"validate", cmd_validate},   {"simulate", cmd_simulate}, {"genealogy", cmd_genealogy},
        {"spine-sim", cmd_spine_sim}, {"density", cmd_density},   {"verify", cmd_verify}};
    const char* help[] = {"check a model and report its classification",
                          "write event logs (JSONL) for independent trees",
                          "sample conditioned trees and k uniform individuals; write their genealogy",
                          "simulate the spine construction with k marks",
                          "evaluate a split-record density (uniform sampling or tilted measure)",
                          "run a verification suite and write reports"};
    std::vector<CLI::App*> subs;
    for (std::size_t c = 0; c < commands.size(); ++c) subs.push_back(app.add_subcommand(commands[c].first, help[c]));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    try {
        RunConfig cfg;
        if (*o_config) apply_config_file(cfg, config_path);
        if (*o_model) load_model_into(cfg, model_path, fs::current_path());
        if (*o_seed) cfg.seed = seed;
        if (*o_reps) cfg.replicates = replicates;
        if (*o_workers) cfg.workers = workers;
        if (*o_out) cfg.out = outdir;
        if (*o_suite) cfg.suite = suite;
        if (*o_scale) cfg.scale = scale;
        check_common(cfg);
        for (std::size_t c = 0; c < commands.size(); ++c)
            if (subs[c]->parsed()) return commands[c].second(cfg, out);
        return usage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return usage;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return validation;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return numeric;
    } catch (const json::exception& e) {
        err << "validation error: " << e.what() << "\n";
        return validation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return validation;
    }
}

}  // namespace mbgw::cli
