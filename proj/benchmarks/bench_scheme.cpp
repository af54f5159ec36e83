#include <benchmark/benchmark.h>

#include "jasdm/model.hpp"
#include "jasdm/noise.hpp"
#include "jasdm/scheme.hpp"

namespace {

using namespace jasdm;

void BM_DiffusionStep(benchmark::State& state) {
  const ModelSpec model = reference_model(0.7, 0.5);
  const SchemeConfig config;
  StepInputs in{0.35, 1.7, 1.0 / 128, 0.05, false};
  for (auto _ : state) {
    benchmark::DoNotOptimize(in.y_current);
    benchmark::DoNotOptimize(jasdm_diffusion_step(in, model, config));
  }
}
BENCHMARK(BM_DiffusionStep);

void BM_Path(benchmark::State& state) {
  const ModelSpec model = reference_model(0.5, 1.0);
  SchemeConfig config;
  config.steps_per_delay = static_cast<int>(state.range(0));
  const NoiseBundle noise = make_noise_bundle(model, config.steps_per_delay, 7, 0);
  for (auto _ : state) {
    Trajectory traj = simulate_path(model, config, noise.fine_grid, noise.wiener_fine);
    benchmark::DoNotOptimize(traj.post_jump.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(noise.wiener_fine.size()));
}
BENCHMARK(BM_Path)->Arg(1 << 9)->Arg(1 << 12);

void BM_NoiseBundle(benchmark::State& state) {
  const ModelSpec model = reference_model(0.5, 1.0);
  std::uint64_t path = 0;
  for (auto _ : state) {
    NoiseBundle noise = make_noise_bundle(model, 1 << 12, 7, path++);
    benchmark::DoNotOptimize(noise.wiener_fine.data());
  }
}
BENCHMARK(BM_NoiseBundle);

void BM_Aggregate(benchmark::State& state) {
  const ModelSpec model = reference_model(0.5, 1.0);
  const NoiseBundle noise = make_noise_bundle(model, 1 << 12, 7, 0);
  const JumpAdaptedGrid coarse =
      build_grid(model.tau, model.horizon, 1 << 5, noise.jump_times);
  for (auto _ : state) {
    auto inc = wiener_increments_for_grid(noise, coarse);
    benchmark::DoNotOptimize(inc.data());
  }
}
BENCHMARK(BM_Aggregate);

}  // namespace

BENCHMARK_MAIN();
