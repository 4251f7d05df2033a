#include <benchmark/benchmark.h>

#include <random>

#include "odflow/model.hpp"
#include "odflow/pipeline.hpp"
#include "odflow/synthgen.hpp"
#include "odflow/trainer.hpp"

using namespace odflow;

namespace {

tc::Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  tc::Tensor t(r, c);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_tensor(n, n, rng), b = random_tensor(n, n, rng);
  for (auto _ : state) {
    tc::Tape tape;
    benchmark::DoNotOptimize(tc::matmul(tape.constant(a), tape.constant(b)).value());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(25)->Arg(64)->Arg(128);

struct Fixture {
  GraphStore store;
  Dataset data;
  ModelConfig config;
  OdFlowModel model;

  explicit Fixture(int side) {
    const SynthConfig sc = synth_preset("commuter", side, side, 10, 3);
    store = build_store(generate_trips(sc), synth_bbox(sc), sc.cell_km, 60, WeightMode::Passengers);
    std::vector<int> days = {0, 1, 2, 3, 4, 5, 6, 7};
    data = Dataset::build(store.grid, store.sequence, days);
    config.embed_dim = 4;
    config.hidden_dim = 24;
    config.heads = 2;
    std::mt19937_64 rng(1);
    model = OdFlowModel(config, side, side, 24, rng);
  }
};

void BM_SpatialLayer(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const long slot = 8 * 24 + 8;
  const bool backward = state.range(1) != 0;
  for (auto _ : state) {
    tc::Tape tape;
    const auto ev = bind_embedding(tape, f.model.params());
    const auto sv = bind_spatial(tape, f.model.params(), f.config);
    const auto init = initial_embedding(ev, f.data.codes, f.data.key_at(slot), f.data.degree_features_at(slot));
    const auto out = spatial_layer(sv, init, f.data.neighbors[static_cast<std::size_t>(slot)], f.config.leaky_slope);
    if (backward) tape.backward(tc::sum(out));
    benchmark::DoNotOptimize(out.value());
  }
}
BENCHMARK(BM_SpatialLayer)->Args({5, 0})->Args({5, 1})->Args({10, 0})->Args({10, 1});

void BM_TrainingStep(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  TrainConfig tc;
  tc.model = f.config;
  const long target = 9 * 24 + 9;
  for (auto _ : state) {
    tc::Tape tape;
    const auto loss = target_loss(tc, f.model.forward(tape, f.data, target), f.data, target);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value());
  }
}
BENCHMARK(BM_TrainingStep)->Arg(5)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
