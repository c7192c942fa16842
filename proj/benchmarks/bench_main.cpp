#include <benchmark/benchmark.h>

#include "mbgw/genealogy.hpp"
#include "mbgw/laws.hpp"
#include "mbgw/spinesim.hpp"
#include "mbgw/treesim.hpp"
#include "mbgw/verify.hpp"

using namespace mbgw;

static void BM_TaylorSolve(benchmark::State& st) {
    ModelSpec A = fixture_two_type();
    const int J = static_cast<int>(st.range(0));
    double t = 1.0;
    for (auto _ : st) {
        GenFunEngine eng(A);
        t += 1e-9;
        benchmark::DoNotOptimize(eng.taylor(t, Ray::from_theta({0.2, 0.4}), J));
    }
}
BENCHMARK(BM_TaylorSolve)->Arg(1)->Arg(3)->Arg(6);

static void BM_Trajectory(benchmark::State& st) {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A);
    for (auto _ : st) {
        eng.clear_cache();
        Trajectory tr(eng, 1.0, Ray::from_theta({0.2, 0.2}), 3, static_cast<int>(st.range(0)), true);
        benchmark::DoNotOptimize(tr.D(0.5, 3, 0));
    }
}
BENCHMARK(BM_Trajectory)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_Simulate(benchmark::State& st) {
    ModelSpec A = fixture_two_type();
    const double T = static_cast<double>(st.range(0)) / 2.0;
    std::uint64_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(simulate(A, 0, T, replicate_seed(1, i++)));
}
BENCHMARK(BM_Simulate)->Arg(2)->Arg(4);

static void BM_Genealogy(benchmark::State& st) {
    ModelSpec A = fixture_two_type();
    std::uint64_t i = 0;
    for (auto _ : st) {
        EventLog log = simulate(A, 0, 2.0, replicate_seed(2, i));
        if (log.alive_sorted(log.T).size() < 3) {
            ++i;
            continue;
        }
        AncestralPath path = ancestral_process(log, uniform_sample(log, 3, i++));
        benchmark::DoNotOptimize(split_record(path, log));
    }
}
BENCHMARK(BM_Genealogy);

static void BM_QSimulatorRun(benchmark::State& st) {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A);
    QSimOptions opt;
    opt.marked_only = st.range(1) != 0;
    QSimulator sim(eng, 0, static_cast<int>(st.range(0)), 1.0, {0.2, 0.2}, opt);
    std::uint64_t i = 0;
    for (auto _ : st) benchmark::DoNotOptimize(sim.run(replicate_seed(3, i++)));
}
BENCHMARK(BM_QSimulatorRun)->Args({1, 0})->Args({3, 0})->Args({3, 1});

static void BM_JointDensity(benchmark::State& st) {
    ModelSpec A = fixture_two_type();
    GenFunEngine eng(A);
    TableTerms terms(eng, 1.0, Ray::from_theta({0.2, 0.2}), 2);
    QContext ctx{&A, &terms, 0};
    SplitRecord rec{2, 0, 1.0, {SplitEvent{0.4, 0, {1, 1}, ColouredPartition::parse("{1}:1|{2}:2"), {1, 2}}}};
    for (auto _ : st) benchmark::DoNotOptimize(q_joint_split_density(ctx, rec));
}
BENCHMARK(BM_JointDensity);

static void BM_Oracle(benchmark::State& st) {
    ModelSpec A = fixture_two_type();
    for (auto _ : st)
        benchmark::DoNotOptimize(
            oracle_uniformization(A, 1.0, 0, OracleFunctional::laplace({0.2, 0.2}), static_cast<int>(st.range(0))));
}
BENCHMARK(BM_Oracle)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
