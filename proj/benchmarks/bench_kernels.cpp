#include <benchmark/benchmark.h>

#include <cmath>

#include "trimsgd/nn.hpp"
#include "trimsgd/regularize.hpp"
#include "trimsgd/rng.hpp"

using namespace trimsgd;

namespace {

RealArray random_array(const Shape& shape, Xoshiro256& rng) {
  RealArray a(shape);
  for (double& v : a.values()) v = 2.0 * rng.uniform01() - 1.0;
  return a;
}

// Batch of 128 through the NN-2 hidden layer (784 -> 256).
void BM_AffineForward(benchmark::State& state) {
  Xoshiro256 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const RealArray x = random_array({n, 784}, rng), w = random_array({784, 256}, rng),
                  b = random_array({256}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::affine_forward(x, w, b));
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * n * 784 * 256, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_AffineForward)->Arg(128)->Arg(512);

void BM_AffineBackward(benchmark::State& state) {
  Xoshiro256 rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const RealArray x = random_array({n, 784}, rng), w = random_array({784, 256}, rng),
                  up = random_array({n, 256}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::affine_backward(x, w, up));
  state.counters["GFLOPS"] = benchmark::Counter(4.0 * n * 784 * 256, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_AffineBackward)->Arg(128);

// LeNet's first convolution on a batch of 32.
void BM_ConvForward(benchmark::State& state) {
  Xoshiro256 rng(3);
  const RealArray x = random_array({32, 1, 28, 28}, rng), k = random_array({6, 1, 5, 5}, rng),
                  b = random_array({6}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, k, b, 1, 2));
}
BENCHMARK(BM_ConvForward);

void BM_ConvBackward(benchmark::State& state) {
  Xoshiro256 rng(4);
  const RealArray x = random_array({32, 6, 14, 14}, rng), k = random_array({16, 6, 5, 5}, rng),
                  up = random_array({32, 16, 10, 10}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, k, up, 1, 0));
}
BENCHMARK(BM_ConvBackward);

void BM_TrimBatch(benchmark::State& state) {
  Xoshiro256 rng(5);
  std::vector<double> losses(static_cast<std::size_t>(state.range(0)));
  for (double& v : losses) v = -std::log(rng.uniform01() + 1e-300);
  for (auto _ : state) benchmark::DoNotOptimize(trim_batch(losses, 0.2));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TrimBatch)->RangeMultiplier(4)->Range(32, 8192)->Complexity(benchmark::oNLogN);

void BM_LabelNoise(benchmark::State& state) {
  std::vector<ClassLabel> labels(128);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<ClassLabel>(1 + i % 10);
  Xoshiro256 rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(inject_label_noise(labels, 0.1, 10, rng));
}
BENCHMARK(BM_LabelNoise);

}  // namespace

BENCHMARK_MAIN();
