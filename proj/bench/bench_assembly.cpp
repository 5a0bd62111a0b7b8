// Serial reference path vs OpenMP path of the element loops.

#include "prc/analysis.hpp"
#include "prc/assembly.hpp"
#include "prc/kkt.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace prc;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(1) == 0 ? Exec::Serial : Exec::Parallel; }

const Discretization& disc(int n, Scheme s)
{
    static std::map<std::pair<int, Scheme>, Discretization> cache;
    auto it = cache.find({n, s});
    if (it == cache.end()) it = cache.emplace(std::pair{n, s}, make_discretization(scheme_mesh(n, ExampleId::Ex2, s), s)).first;
    return it->second;
}

void BM_Laplacian(benchmark::State& state)
{
    const Discretization& d = disc(static_cast<int>(state.range(0)), Scheme::FullRobust);
    const AssemblyOptions opts{exec_of(state), 8, 1.0};
    for (auto _ : state) benchmark::DoNotOptimize(assemble_vector_laplacian(*d.velocity, opts));
}

void BM_MassPiPi(benchmark::State& state)
{
    const Discretization& d = disc(static_cast<int>(state.range(0)), Scheme::FullRobust);
    const AssemblyOptions opts{exec_of(state), 8, 1.0};
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_mass(*d.velocity, MassMode::PiPi, Region::O, d.reconstruction(), opts));
}

void BM_Load(benchmark::State& state)
{
    const Discretization& d = disc(static_cast<int>(state.range(0)), Scheme::FullRobust);
    const ExampleData data = example_data(ExampleId::Ex2, 1e-3, 1e-4);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            assemble_load(*d.velocity, data.ud, TestMode::Pi, Region::O, d.reconstruction(), data_options(exec_of(state))));
}

void BM_Reconstruction(benchmark::State& state)
{
    const Discretization& d = disc(static_cast<int>(state.range(0)), Scheme::FullRobust);
    for (auto _ : state) benchmark::DoNotOptimize(build_reconstruction(d.velocity, d.recon->target_ptr(), exec_of(state)));
}

void BM_ScottVogeliusDivergence(benchmark::State& state)
{
    const Discretization& d = disc(static_cast<int>(state.range(0)), Scheme::ScottVogelius);
    const AssemblyOptions opts{exec_of(state), 8, 1.0};
    for (auto _ : state) benchmark::DoNotOptimize(assemble_divergence(*d.velocity, *d.pressure, opts));
}

void BM_ErrorNorm(benchmark::State& state)
{
    const Discretization& d = disc(static_cast<int>(state.range(0)), Scheme::FullRobust);
    const ExampleData data = example_data(ExampleId::Ex2, 1e-3, 0.0);
    const Vector c = interpolate(*d.velocity, data.u);
    for (auto _ : state) benchmark::DoNotOptimize(h1_error(*d.velocity, c, data.grad_u, 12, exec_of(state)));
}

// second argument: 0 serial, 1 parallel
void levels(benchmark::internal::Benchmark* b)
{
    b->ArgNames({"n", "parallel"});
    for (int n : {20, 40, 80})
        for (int p : {0, 1}) b->Args({n, p});
    b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_Laplacian)->Apply(levels);
BENCHMARK(BM_MassPiPi)->Apply(levels);
BENCHMARK(BM_Load)->Apply(levels);
BENCHMARK(BM_Reconstruction)->Apply(levels);
BENCHMARK(BM_ScottVogeliusDivergence)->Apply(levels);
BENCHMARK(BM_ErrorNorm)->Apply(levels);

BENCHMARK_MAIN();
