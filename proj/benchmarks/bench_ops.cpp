#include <benchmark/benchmark.h>

#include "gradflip/asg.hpp"
#include "gradflip/autograd.hpp"
#include "gradflip/layers.hpp"
#include "gradflip/ops.hpp"
#include "gradflip/rng.hpp"

namespace gradflip {
namespace {

std::vector<double> uniform(std::size_t n, std::string_view id) {
  RngStream rng(1, id);
  std::vector<double> v(n);
  for (double& e : v) e = rng.uniform(-1.0, 1.0);
  return v;
}

void BM_Conv1dForward(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const std::size_t C = 16, K = 5;
  const Tensor x = Tensor::from({T, C}, uniform(T * C, "x"));
  const Tensor w = Tensor::from({2 * C, C, K}, uniform(2 * C * C * K, "w"));
  const Tensor b = Tensor::zeros({2 * C});
  for (auto _ : state) benchmark::DoNotOptimize(layers::conv1d(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_Conv1dForward)->Arg(32)->Arg(128)->Arg(512);

void BM_Conv1dBackward(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const std::size_t C = 16, K = 5;
  const Tensor x = Tensor::parameter({T, C}, uniform(T * C, "x"));
  const Tensor w = Tensor::parameter({2 * C, C, K}, uniform(2 * C * C * K, "w"));
  const Tensor b = Tensor::parameter({2 * C}, std::vector<double>(2 * C, 0.0));
  for (auto _ : state) {
    const Tensor loss = ops::sum_all(layers::glu(layers::conv1d(x, w, b)));
    benchmark::DoNotOptimize(backward(loss));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_Conv1dBackward)->Arg(32)->Arg(128)->Arg(512);

void BM_AsgLoss(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const std::size_t K = 7;
  const Tensor em = Tensor::parameter({T, K}, uniform(T * K, "em"));
  const Tensor tr = Tensor::parameter({K, K}, uniform(K * K, "tr"));
  asg::TokenSeq target;
  for (std::size_t n = 0; n < T / 3; ++n) target.push_back(static_cast<int>(n % K));
  for (auto _ : state) benchmark::DoNotOptimize(backward(asg::asg_loss(em, tr, target)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_AsgLoss)->Arg(32)->Arg(128)->Arg(512);

void BM_Viterbi(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const std::size_t K = 7;
  const Tensor em = Tensor::from({T, K}, uniform(T * K, "em"));
  const Tensor tr = Tensor::from({K, K}, uniform(K * K, "tr"));
  for (auto _ : state) benchmark::DoNotOptimize(asg::viterbi_decode(em, tr));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(T));
}
BENCHMARK(BM_Viterbi)->Arg(32)->Arg(512);

}  // namespace
}  // namespace gradflip
