#include <benchmark/benchmark.h>

#include "ssc/ops.hpp"
#include "ssc/scene.hpp"
#include "ssc/sketch.hpp"
#include "ssc/tsdf.hpp"

namespace {

ssc::GridSpec bench_spec(std::int64_t n) {
  ssc::GridSpec s;
  s.dims = {n, n * 3 / 4, n};
  s.voxel_size = 0.05;
  s.origin = {0, 0, 0};
  return s;
}

void bm_conv3d_forward(benchmark::State& state) {
  ssc::Rng rng(1);
  const std::int64_t c = state.range(0);
  ssc::nn::Tensor x = ssc::nn::randn({1, c, 16, 12, 16}, rng);
  ssc::nn::Tensor w = ssc::nn::kaiming_uniform({c, c, 3, 3, 3}, c * 27, rng, false);
  ssc::nn::Tensor b = ssc::nn::Tensor::zeros({c});
  for (auto _ : state) {
    auto y = ssc::nn::conv3d(x, w, b, ssc::nn::ConvOpts::iso(1, 1, 1));
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(bm_conv3d_forward)->Arg(8)->Arg(16);

void bm_conv3d_backward(benchmark::State& state) {
  ssc::Rng rng(1);
  const std::int64_t c = state.range(0);
  for (auto _ : state) {
    ssc::nn::Tensor x = ssc::nn::randn({1, c, 16, 12, 16}, rng, true);
    ssc::nn::Tensor w = ssc::nn::kaiming_uniform({c, c, 3, 3, 3}, c * 27, rng);
    ssc::nn::Tensor b = ssc::nn::Tensor::zeros({c}, true);
    auto loss = ssc::nn::sum(ssc::nn::conv3d(x, w, b, ssc::nn::ConvOpts::iso(1, 1, 1)));
    loss.backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(bm_conv3d_backward)->Arg(8);

void bm_extract_sketch(benchmark::State& state) {
  ssc::Rng rng(3);
  ssc::SemanticLabelGrid labels(bench_spec(32), 5);
  for (auto& l : labels.labels) l = static_cast<std::uint8_t>(rng.uniform_int(0, 4));
  for (auto _ : state) {
    auto sketch = ssc::extract_sketch(labels);
    benchmark::DoNotOptimize(sketch.grid.values.data());
  }
}
BENCHMARK(bm_extract_sketch);

void bm_encode_tsdf(benchmark::State& state) {
  const ssc::SceneSample sample = ssc::generate_synthetic_scene(11, bench_spec(16), 5);
  for (auto _ : state) {
    auto vol = ssc::encode_tsdf(sample.depth, sample.camera, sample.labels.spec, 0.24);
    benchmark::DoNotOptimize(vol.grid.values.data());
  }
}
BENCHMARK(bm_encode_tsdf);

void bm_generate_scene(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto sample = ssc::generate_synthetic_scene(++seed, bench_spec(16), 5);
    benchmark::DoNotOptimize(sample.depth.values.data());
  }
}
BENCHMARK(bm_generate_scene);

}  // namespace

BENCHMARK_MAIN();
