// One pass/fail line per acceptance criterion.
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mbgw/verify.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mbgw acceptance criteria"};
    mbgw::AcceptanceConfig cfg;
    std::vector<std::string> only;
    bool verbose = false;
    app.add_option("--seed", cfg.seed, "master seed");
    app.add_option("--workers", cfg.workers, "worker threads (0: all cores)");
    app.add_option("--scale", cfg.scale, "multiplier on Monte Carlo replicate counts")->check(CLI::PositiveNumber);
    app.add_option("--only", only, "criteria to run (default: all)");
    app.add_flag("-v,--verbose", verbose, "print metrics");
    CLI11_PARSE(app, argc, argv);
    if (only.empty()) only = mbgw::AcceptanceSuite::ids();

    mbgw::AcceptanceSuite suite(cfg);
    int failed = 0;
    for (const auto& id : only) {
        mbgw::CriterionResult r = suite.run(id);
        failed += !r.pass;
        std::printf("%-4s %s  %s: %s [%.1f s]\n", r.id.c_str(), r.pass ? "PASS" : "FAIL", r.title.c_str(),
                    r.summary.c_str(), r.seconds);
        if (verbose)
            for (const auto& [name, v] : r.metrics) std::printf("       %s = %.10g\n", name.c_str(), v);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(only.size()) - failed, only.size());
    return failed == 0 ? 0 : 1;
}
