#include <filesystem>

#include <benchmark/benchmark.h>

#include "phasor/embf.hpp"
#include "phasor/experiment.hpp"
#include "phasor/trainer.hpp"

namespace {

using namespace phasor;

const Dataset& dataset() {
  static const Dataset ds = [] {
    ExperimentConfig cfg;
    cfg.data.n_reviews = 200;
    return build_dataset(cfg);
  }();
  return ds;
}

void BM_Encode(benchmark::State& state) {
  TrainConfig cfg;
  const Model m = init_model(cfg, 128);
  const BatchItem item = to_item(dataset().train_blocks.front());
  for (auto _ : state) benchmark::DoNotOptimize(represent(m, item, nullptr));
}
BENCHMARK(BM_Encode);

void BM_TrainMicroBatch(benchmark::State& state) {
  TrainConfig cfg;
  const Dataset& ds = dataset();
  const Model m = init_model(cfg, ds.lexicon->vocab_size());
  const auto plan = epoch_plan(ds.triplets.triplets, cfg, 0);
  std::vector<Triplet> chunk;
  for (std::size_t id : plan.front()) chunk.push_back(ds.triplets.triplets[id]);
  const TripletBatch batch = make_batch(chunk, plan.front());
  for (auto _ : state) {
    std::map<std::string, DenseVector> grads;
    benchmark::DoNotOptimize(accumulate_batch(m, batch, cfg, nullptr, 1.0, 1.0, grads));
  }
}
BENCHMARK(BM_TrainMicroBatch)->Unit(benchmark::kMicrosecond);

void BM_BuildDataset(benchmark::State& state) {
  ExperimentConfig cfg;
  cfg.data.n_reviews = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_dataset(cfg));
}
BENCHMARK(BM_BuildDataset)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_EmbfRoundTrip(benchmark::State& state) {
  EmbfTensor t{static_cast<std::uint32_t>(state.range(0)), 64, {}};
  t.data.assign(static_cast<std::size_t>(t.rows) * t.dim, 0.25f);
  for (auto _ : state) benchmark::DoNotOptimize(decode_embf(encode_embf(t)));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(t.data.size() * sizeof(float)));
}
BENCHMARK(BM_EmbfRoundTrip)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
