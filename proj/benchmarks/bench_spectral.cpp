#include "hypermml/spectral.hpp"

#include "hypermml/params.hpp"

#include <benchmark/benchmark.h>

using namespace hypermml;

namespace {

Mat noise(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(1);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

void BM_ForwardFft(benchmark::State& state) {
  const Mat x = noise(30, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(spectral::forward_fft(x, 500.0));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
// 2500 = 5 s at 500 Hz exercises the non-power-of-two path.
BENCHMARK(BM_ForwardFft)->Arg(128)->Arg(1024)->Arg(2500);

void BM_BandFeatures(benchmark::State& state) {
  const Mat x = noise(30, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(spectral::extract_band_features(x, 500.0));
}
BENCHMARK(BM_BandFeatures)->Arg(128)->Arg(2500);

void BM_BandFilterBackward(benchmark::State& state) {
  const Mat x = noise(8, 128);
  const auto masks = spectral::band_masks(spectral::frequency_axis(128, 128.0));
  for (auto _ : state) {
    auto v = ag::parameter(x);
    auto y = ag::differential_entropy(ag::band_filter(v, masks[spectral::Band::alpha]));
    ag::backward(ag::sum(y));
    benchmark::DoNotOptimize(v.grad());
  }
}
BENCHMARK(BM_BandFilterBackward);

}  // namespace
