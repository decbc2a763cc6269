#include <benchmark/benchmark.h>

#include <numeric>

#include "dumn/generator.hpp"
#include "dumn/trainer.hpp"

using namespace dumn;

namespace {

struct Fixture {
  TrainConfig config;
  GenConfig gen;
  Dataset data;
  std::vector<std::size_t> batch;

  Fixture() {
    gen.n_users = 60;
    gen.n_items = 200;
    data = build_samples(generate(gen).log, config.seq_len, config.target);
    batch.resize(static_cast<std::size_t>(config.batch_size));
    std::iota(batch.begin(), batch.end(), data.samples.size() / 2);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_BatchGradient(benchmark::State& state) {
  const Fixture& f = fixture();
  Model model(f.config, f.data.vocab);
  Trainer trainer(model);
  GradBuffer grads(model.params());
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.batch_gradient(f.data, f.batch, grads, parallel).l1);
}
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_Score(benchmark::State& state) {
  const Fixture& f = fixture();
  const Model model(f.config, f.data.vocab);
  std::vector<std::size_t> indices(512);
  std::iota(indices.begin(), indices.end(), 0);
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(score(model, f.data, indices, parallel));
}
BENCHMARK(BM_Score)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_Generate(benchmark::State& state) {
  GenConfig g = fixture().gen;
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(parallel ? generate(g) : generate_serial(g));
}
BENCHMARK(BM_Generate)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
