#include <benchmark/benchmark.h>

#include "vsvio/model.hpp"
#include "vsvio/simkit.hpp"
#include "vsvio/tensor.hpp"
#include "vsvio/trainer.hpp"

using namespace vsvio;

namespace {

Tensor randn(Shape shape, Rng& rng, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor::from(std::move(shape), std::move(v), grad);
}

void BM_Linear(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto x = randn({batch, 256}, rng), w = randn({256, 256}, rng), b = randn({256}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(linear(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_Linear)->Arg(1)->Arg(16);

void BM_LinearBackward(benchmark::State& state) {
  Rng rng(2);
  auto x = randn({16, 256}, rng), w = randn({256, 256}, rng, true), b = randn({256}, rng, true);
  for (auto _ : state) {
    sum(tanh(linear(x, w, b))).backward();
    w.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_LinearBackward);

void BM_Conv1d(benchmark::State& state) {
  Rng rng(3);
  auto x = randn({16, 8, 11}, rng), w = randn({8, 8, 3}, rng), b = randn({8}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, b, 2, 1));
}
BENCHMARK(BM_Conv1d);

struct Data {
  sim::Dataset ds;
  VioModel model;
  Data() {
    sim::SimConfig c;
    c.num_sequences = 3;
    c.frames_per_sequence = 200;
    ds = sim::generate_dataset(c, 7);
    Rng rng(4);
    model.init(rng);
    fit_model_norm(model, ds.train());
  }
};

Data& data() {
  static Data d;
  return d;
}

void BM_Rollout(benchmark::State& state) {
  auto& d = data();
  const auto in = d.ds.sequences[0].inputs();
  const PolicyMode mode = state.range(0) ? PolicyMode::learned() : PolicyMode::always();
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(rollout(d.model, in, mode, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.size()));
}
BENCHMARK(BM_Rollout)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto& d = data();
  auto windows = make_windows(d.ds.train(), 10, 10);
  const auto batch = std::span<const Window>(windows).first(16);
  nn::Adam opt(d.model.parameters(), {1e-7});
  Rng rng(6);
  for (auto _ : state) {
    auto bl = batch_loss(d.model, d.ds.train(), batch, 10, TrainGating::kLearned, 0.5, 1.0, 1e-5,
                         100.0, rng);
    opt.zero_grad();
    bl.total.backward();
    opt.step();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
