// Serial reference against the OpenMP kernels on the same inputs.

#include <benchmark/benchmark.h>

#include <random>

#include "stresstomo/fields.hpp"
#include "stresstomo/forward.hpp"
#include "stresstomo/inversion.hpp"

using namespace stresstomo;

namespace {

struct Setup {
  Grid3 grid = Grid3::cube(32, 1.1, Domain::ball({0.0, 0.0, 0.0}, 1.0));
  CoordinatePlaneFamily plane{grid, 2, 64, 48, 32};
  SymField2 R;
  Sinogram data;
  MaterialParams params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, 0.4, -0.2, 0.5});

  Setup() {
    std::mt19937_64 rng(1);
    BumpSpec spec;
    R = random_residual_stress(grid, rng, spec);
    data = longitudinal_transform(R, plane);
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::omp; }

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) == 0 ? "serial" : "omp x" + std::to_string(max_threads()));
}

void BM_LongitudinalForward(benchmark::State& state) {
  const Setup& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(longitudinal_transform(s.R, s.plane, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.data.size()));
  label(state);
}

void BM_LongitudinalAdjoint(benchmark::State& state) {
  const Setup& s = setup();
  for (auto _ : state) {
    SymField2 out(s.grid);
    longitudinal_adjoint(s.data, s.plane, out, exec_of(state));
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.data.size()));
  label(state);
}

void BM_FilteredBackprojection(benchmark::State& state) {
  const Setup& s = setup();
  const Sinogram scalar = scalar_transform(trace(s.R), s.plane);
  for (auto _ : state) benchmark::DoNotOptimize(filtered_backprojection(scalar, s.plane, exec_of(state)));
  label(state);
}

void BM_Propagators(benchmark::State& state) {
  const Setup& s = setup();
  for (auto _ : state) benchmark::DoNotOptimize(propagator_sinogram(s.R, s.params, s.plane, 1e-3, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.data.size()));
  label(state);
}

}  // namespace

BENCHMARK(BM_LongitudinalForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LongitudinalAdjoint)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FilteredBackprojection)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Propagators)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
