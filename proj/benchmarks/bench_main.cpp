#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dramcal/address_map.hpp"
#include "dramcal/bvls.hpp"
#include "dramcal/device_spec.hpp"
#include "dramcal/memctrl.hpp"
#include "dramcal/trace_stats.hpp"
#include "dramcal/workload.hpp"

namespace {

const dramcal::DeviceSpec& device() {
    static const auto d = dramcal::load_device_spec(DRAMCAL_CONFIGS_DIR "/m393a1g43db0_cpb.json");
    return d;
}

const dramcal::AddressMapping& mapping() {
    static const auto m = dramcal::load_mapping(DRAMCAL_CONFIGS_DIR "/ddr4_2rank.map");
    return m;
}

void BM_Decompose(benchmark::State& state) {
    const auto& m = mapping();
    std::uint64_t addr = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dramcal::decompose(m, addr));
        addr += 64;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Decompose);

void BM_Schedule(benchmark::State& state) {
    const auto stream = dramcal::generate(dramcal::KernelKind::Triad, static_cast<std::uint64_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(dramcal::schedule(stream, mapping(), device()));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}
BENCHMARK(BM_Schedule)->Arg(1 << 14)->Arg(1 << 18)->Unit(benchmark::kMillisecond);

void BM_Reduce(benchmark::State& state) {
    const auto stream = dramcal::generate(dramcal::KernelKind::Copy, static_cast<std::uint64_t>(state.range(0)));
    const auto trace = dramcal::schedule(stream, mapping(), device());
    for (auto _ : state) benchmark::DoNotOptimize(dramcal::reduce(trace));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trace.commands.size()));
}
BENCHMARK(BM_Reduce)->Arg(1 << 18)->Unit(benchmark::kMillisecond);

void BM_Bvls(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const std::size_t n = 6;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    dramcal::Matrix a(m, n);
    std::vector<double> y(m);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) a(r, c) = g(rng);
        y[r] = 3.0 * g(rng);
    }
    std::vector<dramcal::Interval> bounds(n, dramcal::Interval{0.0, 1.0});
    for (auto _ : state) benchmark::DoNotOptimize(dramcal::solve_bvls(a, y, bounds));
}
BENCHMARK(BM_Bvls)->Arg(7)->Arg(64)->Arg(1024);

}  // namespace
BENCHMARK_MAIN();
