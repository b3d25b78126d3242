#include <benchmark/benchmark.h>

#include "dehaze/autodiff.hpp"
#include "dehaze/dcp.hpp"
#include "dehaze/metrics.hpp"
#include "dehaze/network.hpp"
#include "dehaze/random.hpp"

namespace {

using dehaze::Rng;
using dehaze::ad::Tape;
using dehaze::ad::Tensor;

Tensor<float> random_tensor(std::vector<int> shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform());
  return t;
}

dehaze::Image<float> random_image(int h, int w, Rng& rng) {
  dehaze::Image<float> img(h, w);
  for (auto& v : img.values) v = static_cast<float>(rng.uniform());
  return img;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int channels = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor<float> x = random_tensor({1, channels, 64, 64}, rng);
  Tensor<float> k = random_tensor({channels, channels, 3, 3}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    const int y = tape.conv2d(tape.leaf(x), tape.leaf(k), -1, 1, 1);
    benchmark::DoNotOptimize(tape.value(y).data.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(64)->Arg(128);

void BM_GeneratorForward(benchmark::State& state) {
  dehaze::GeneratorConfig config;
  config.growth_rate = 4;
  config.db_layers = {2, 2};
  config.bottleneck_layers = 4;
  config.input_size = 64;
  auto net = dehaze::Network<float>::instantiate(dehaze::build_tiramisu(config), 7);
  Rng rng(2);
  Tensor<float> x = random_tensor({1, 3, 64, 64}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    Rng drop(3);
    const auto fwd = net.forward(tape, tape.leaf(x), true, &drop);
    benchmark::DoNotOptimize(tape.value(fwd.output).data.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GeneratorForward)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  Rng rng(4);
  const auto a = random_image(256, 256, rng);
  const auto b = random_image(256, 256, rng);
  for (auto _ : state) benchmark::DoNotOptimize(dehaze::ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

void BM_DcpDehaze(benchmark::State& state) {
  Rng rng(5);
  const auto img = random_image(256, 256, rng);
  for (auto _ : state) {
    auto result = dehaze::dcp_dehaze(img);
    benchmark::DoNotOptimize(result.dehazed.values.data());
  }
}
BENCHMARK(BM_DcpDehaze)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
