#include "hypermml/trainer.hpp"

#include <benchmark/benchmark.h>

using namespace hypermml;

namespace {

const Dataset& dataset() {
  static const Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  return ds;
}

std::vector<DialogueGroup> first_dialogues(std::size_t n) {
  const auto all = all_segment_indices(dataset());
  auto groups = group_dialogues(dataset(), all);
  groups.resize(std::min(n, groups.size()));
  return groups;
}

void BM_AbemaForward(benchmark::State& state) {
  const HyperMml model(ModelConfig{}, ModelDims::from(dataset()), 1);
  const auto& seg = dataset().segments[0];
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.abema()->forward(seg.eeg, seg.subject_id));
}
BENCHMARK(BM_AbemaForward);

void BM_PipelineForward(benchmark::State& state) {
  const HyperMml model(ModelConfig{}, ModelDims::from(dataset()), 1);
  const auto groups = first_dialogues(16);
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(dataset(), groups).logits);
}
BENCHMARK(BM_PipelineForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  HyperMml model(ModelConfig{}, ModelDims::from(dataset()), 1);
  Adam adam(model.params(), AdamOptions{});
  const auto groups = first_dialogues(16);
  const auto theta = model.params().vars();
  std::mt19937_64 rng(2);
  for (auto _ : state) {
    const auto out = model.forward(dataset(), groups, &rng);
    ag::backward(regularized_loss(out.logits, out.labels, theta, kDefaultL2));
    adam.step();
    model.params().zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
