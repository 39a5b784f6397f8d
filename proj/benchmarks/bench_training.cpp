#include <benchmark/benchmark.h>

#include "trimsgd/dataio.hpp"
#include "trimsgd/model.hpp"
#include "trimsgd/optimize.hpp"

using namespace trimsgd;

namespace {

MiniBatch random_batch(std::size_t n, std::size_t side, Xoshiro256& rng) {
  MiniBatch b;
  b.inputs = RealArray({n, 1, side, side});
  for (double& v : b.inputs.values()) v = rng.uniform01();
  for (std::size_t i = 0; i < n; ++i) {
    b.indices.push_back(i);
    b.labels.push_back(static_cast<ClassLabel>(1 + rng.uniform_index(10)));
  }
  return b;
}

// One B = 128 iteration: noise, forward, trim, backward, momentum update.
void TrainStep(benchmark::State& state, Arch arch, double rho, double eps) {
  Xoshiro256 rng(7);
  const MiniBatch batch = random_batch(128, 28, rng);
  Model model = build_model(arch, {1, 28, 28}, 10, 1);
  OptimizerState opt = make_optimizer_state(OptimizerKind::SGD, model.param_count());
  const LrSchedule schedule{LrScheduleKind::Constant, 1e-4, 1, 10.0};
  const TrimNoiseConfig config{rho, eps, TrimSchedule::Constant};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        trimsgd_train_step(model, batch, config, opt, schedule, TrainClock{0, 0, 1}, rng));
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK_CAPTURE(TrainStep, nn2_plain, Arch::NN2, 0.0, 0.0)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(TrainStep, nn2_noise_trim, Arch::NN2, 0.1, 0.2)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(TrainStep, nn3_noise_trim, Arch::NN3, 0.1, 0.2)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(TrainStep, lenet_noise_trim, Arch::LeNet, 0.1, 0.2)->Unit(benchmark::kMillisecond);

void Evaluate(benchmark::State& state) {
  Xoshiro256 rng(8);
  const MiniBatch batch = random_batch(512, 28, rng);
  const Model model = build_model(Arch::NN2, {1, 28, 28}, 10, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, batch.inputs));
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
