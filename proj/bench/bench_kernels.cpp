// Serial reference vs OpenMP kernels on pipeline-shaped workloads.
#include <benchmark/benchmark.h>

#include "fcooper/encoder.hpp"
#include "fcooper/evalkit.hpp"
#include "fcooper/kernels.hpp"
#include "fcooper/rng.hpp"

using namespace fcooper;

namespace {

kernels::Tensor4 random_tensor(int c, int d, int h, int w, uint64_t seed) {
  kernels::Tensor4 t(c, d, h, w);
  SplitMix64 rng(seed);
  for (float& v : t.data) v = rng.next_unit_f() - 0.5f;
  return t;
}

std::vector<float> random_vec(size_t n, uint64_t seed) {
  std::vector<float> v(n);
  SplitMix64 rng(seed);
  for (float& x : v) x = rng.next_unit_f() - 0.5f;
  return v;
}

const kernels::Conv3DSpec kSpec{32, 32, 2, 1, true};

void BM_conv3d_serial(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const auto in = random_tensor(32, 10, hw, hw, 1);
  const auto w = random_vec(static_cast<size_t>(32) * 32 * 27, 2);
  const auto b = random_vec(32, 3);
  kernels::Tensor4 out;
  for (auto _ : state) {
    kernels::ref::conv3d(in, w, b, kSpec, out);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_conv3d_serial)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_conv3d_omp(benchmark::State& state) {
  const int hw = static_cast<int>(state.range(0));
  const auto in = random_tensor(32, 10, hw, hw, 1);
  const auto w = random_vec(static_cast<size_t>(32) * 32 * 27, 2);
  const auto b = random_vec(32, 3);
  kernels::Tensor4 out;
  for (auto _ : state) {
    kernels::conv3d(in, w, b, kSpec, out);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_conv3d_omp)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_maxout_serial(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  const auto a = random_vec(n, 4);
  const auto b = random_vec(n, 5);
  std::vector<float> out(n);
  for (auto _ : state) {
    kernels::ref::maxout(a, b, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_maxout_serial)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

void BM_maxout_omp(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  const auto a = random_vec(n, 4);
  const auto b = random_vec(n, 5);
  std::vector<float> out(n);
  for (auto _ : state) {
    kernels::maxout(a, b, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_maxout_omp)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

void BM_fln_desk_grid(benchmark::State& state) {
  const auto weights = encoder::EncoderWeights::from_seed(7);
  const auto cfg = evalkit::occlusion_scene(7);
  const auto scene = evalkit::generate_scene(cfg, 7);
  const auto store = evalkit::encode_cloud(cfg.grid, scene.clouds[0], weights, 7);
  for (auto _ : state) {
    auto map = encoder::spatial_features(store, weights);
    benchmark::DoNotOptimize(map.data.data());
  }
}
BENCHMARK(BM_fln_desk_grid)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
