#include <benchmark/benchmark.h>

#include "gradflip/analysis.hpp"
#include "gradflip/data.hpp"
#include "gradflip/model.hpp"
#include "gradflip/trainer.hpp"

namespace gradflip {
namespace {

const Dataset& toy_train() {
  static const Dataset ds = [] {
    GenConfig g;
    g.utterances_per_speaker = 4;
    return generate(g);
  }();
  return ds;
}

Batch first_batch(const Dataset& ds, std::size_t n) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) b.items.push_back({&ds.utterances[i], ds.utterances[i].speaker});
  return b;
}

void BM_TrainStep(benchmark::State& state) {
  const auto mode = static_cast<TrainMode>(state.range(0));
  ModelGraph m(ModelConfig::toy(), 1);
  const Batch b = first_batch(toy_train(), 4);
  const RngStream drop(1, "bench");
  StepOptions opt;
  opt.dropout_rng = &drop;
  for (auto _ : state) benchmark::DoNotOptimize(step(m, b, mode, 0.1, opt));
  state.SetLabel(std::string(to_string(mode)));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(TrainMode::baseline))
    ->Arg(static_cast<int>(TrainMode::mt))
    ->Unit(benchmark::kMillisecond);

void BM_EvaluateLer(benchmark::State& state) {
  const ModelGraph m(ModelConfig::toy(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_ler(m, toy_train()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(toy_train().size()));
}
BENCHMARK(BM_EvaluateLer)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gradflip
