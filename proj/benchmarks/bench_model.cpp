#include <ugss/ingestion.hpp>
#include <ugss/training.hpp>

#include <benchmark/benchmark.h>

#include <numeric>

using namespace ugss;

namespace {

Dataset bench_data(int n) {
  ingest::SyntheticSpec s;
  s.n_samples = n;
  s.steps = 24;
  s.dims = 8;
  s.missing_rate = 0.6;
  s.seed = 1;
  return apply_artificial_masking(ingest::generate_synthetic(s), 0.05, 2);
}

std::vector<std::size_t> first(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void BM_Predict(benchmark::State& state) {
  const Dataset d = bench_data(static_cast<int>(state.range(0)));
  const ExperimentConfig c;
  const train::UgssModel m(c, d.dims(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(train::predict(m, d));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset d = bench_data(static_cast<int>(n));
  const auto idx = first(n);
  const Batch f = make_batch(d, idx, false), b = make_batch(d, idx, true);
  ExperimentConfig c;
  c.cell = state.range(1) == 0 ? CellType::gru_u : CellType::vanilla_gru;
  train::UgssModel m(c, d.dims(), 3);
  Rng rng(4);
  for (auto _ : state) {
    ad::Tape tape;
    const auto r = train::run_model(tape, m, f, &b, train::gaussian_noise(rng), train::gaussian_noise(rng));
    for (auto* p : m.parameters()) p->zero_grad();
    tape.backward(r.total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Args({16, 0})->Args({64, 0})->Args({64, 1})->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const Dataset d = bench_data(128);
  ExperimentConfig c;
  c.epochs = 1;
  c.batch_size = 16;
  for (auto _ : state) benchmark::DoNotOptimize(train::train(c, d, d));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
