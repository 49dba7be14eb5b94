// Serial reference loops against the blocked OpenMP kernels and the cell-list evaluator.
// Run with --benchmark_filter=... ; CAPMC_BENCH_THREADS limits the parallel variants.

#include <benchmark/benchmark.h>

#include <cstdlib>

#include "capmc/energy.hpp"
#include "capmc/kernel.hpp"
#include "capmc/parallel.hpp"
#include "capmc/path.hpp"

namespace {

capmc::WeightedMeasure occupation(std::size_t n) {
    return capmc::occupation_measure(capmc::sample_brownian(3, n, 1.0, 7));
}

void configure_threads() {
    if (const char* t = std::getenv("CAPMC_BENCH_THREADS")) capmc::set_worker_count(std::atoi(t));
}

void BM_direct_serial(benchmark::State& state) {
    const auto m = occupation(static_cast<std::size_t>(state.range(0)));
    const auto k = capmc::smooth(capmc::riesz_kernel(1.0), 1e-3, 3);
    for (auto _ : state) benchmark::DoNotOptimize(capmc::serial::direct_energy(m, k));
    state.SetComplexityN(state.range(0));
}

void BM_direct_parallel(benchmark::State& state) {
    configure_threads();
    const auto m = occupation(static_cast<std::size_t>(state.range(0)));
    const auto k = capmc::smooth(capmc::riesz_kernel(1.0), 1e-3, 3);
    for (auto _ : state) benchmark::DoNotOptimize(capmc::direct_energy(m, k));
    state.counters["threads"] = capmc::worker_count();
}

void BM_gaussian_serial(benchmark::State& state) {
    const auto m = occupation(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(capmc::serial::gaussian_energy(m, 0.05));
}

void BM_gaussian_parallel(benchmark::State& state) {
    configure_threads();
    const auto m = occupation(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(capmc::gaussian_energy(m, 0.05));
    state.counters["threads"] = capmc::worker_count();
}

void BM_gaussian_fast(benchmark::State& state) {
    configure_threads();
    const auto m = occupation(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(capmc::gaussian_energy_fast(m, 0.05, 6.0).value);
    state.counters["threads"] = capmc::worker_count();
}

}  // namespace

BENCHMARK(BM_direct_serial)->RangeMultiplier(2)->Range(1 << 10, 1 << 12)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_direct_parallel)->RangeMultiplier(2)->Range(1 << 10, 1 << 12)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gaussian_serial)->RangeMultiplier(2)->Range(1 << 10, 1 << 12)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gaussian_parallel)->RangeMultiplier(2)->Range(1 << 10, 1 << 12)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gaussian_fast)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
