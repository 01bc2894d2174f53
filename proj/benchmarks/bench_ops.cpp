#include <benchmark/benchmark.h>

#include "dcv/features.hpp"
#include "dcv/filters.hpp"
#include "dcv/geometry.hpp"
#include "dcv/losses.hpp"
#include "dcv/rng.hpp"

using namespace dcv;

namespace {

Tensor noise(std::int64_t n, std::int64_t c, std::int64_t size) {
  Tensor t(Shape{n, c, size, size}, DType::f32);
  Rng rng(7);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(0.0, 1.0));
  return t;
}

// Args: batch, image side. Items are images.
void BM_Sobel(benchmark::State& state) {
  const Var x(noise(state.range(0), 3, state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(sobel_edges(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sobel)->ArgsProduct({{1, 4, 16}, {256}})->Unit(benchmark::kMillisecond);

void BM_Gaussian(benchmark::State& state) {
  const Var x(noise(state.range(0), 3, state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur2d(x, 5, 5, 1.5, 1.5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Gaussian)->ArgsProduct({{1, 4, 16}, {256}})->Unit(benchmark::kMillisecond);

void BM_WarpPerspective(benchmark::State& state) {
  const std::int64_t s = state.range(1);
  const Var x(noise(state.range(0), 3, s));
  const Var h(to_tensor(lift_affine(get_rotation_matrix2d(Vec2(0.5 * (s - 1), 0.5 * (s - 1)), 10.0, 1.05)), DType::f32));
  for (auto _ : state) benchmark::DoNotOptimize(warp_perspective(x, h, s, s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WarpPerspective)->ArgsProduct({{1, 4, 16}, {256}})->Unit(benchmark::kMillisecond);

void BM_SsimLossBackward(benchmark::State& state) {
  const Tensor a = noise(1, 3, state.range(0)), b = noise(1, 3, state.range(0));
  for (auto _ : state) {
    Tape tape;
    const Var x = tape.leaf(a);
    benchmark::DoNotOptimize(tape.backward(ssim_loss(x, Var(b), 11)));
  }
}
BENCHMARK(BM_SsimLossBackward)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DetectAndDescribe(benchmark::State& state) {
  const Var x(noise(1, 1, state.range(0)).to(DType::f64));
  const Var smooth = gaussian_blur2d(x, 7, 7, 2.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(detect_and_describe(smooth, 500));
}
BENCHMARK(BM_DetectAndDescribe)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
