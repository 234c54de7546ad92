#include <benchmark/benchmark.h>

#include "phasor/losses.hpp"
#include "phasor/masking.hpp"
#include "phasor/numerics.hpp"
#include "phasor/zrcp.hpp"

namespace {

using namespace phasor;

// Triplets of [anchor, positive, negative] over two aspects.
struct Batch {
  std::vector<DenseVector> h;
  std::vector<ComplexEmbedding> z;
  std::vector<SemanticLabel> labels;
  std::vector<PairIndex> pairs;
};

Batch make(std::size_t triplets, std::size_t dim) {
  RngStream rng(1);
  Batch b;
  for (std::size_t t = 0; t < triplets; ++t) {
    const SemanticLabel q{static_cast<int>(t % 2), t % 3 ? Polarity::Positive : Polarity::Negative};
    const SemanticLabel n{q.aspect, q.polarity == Polarity::Positive ? Polarity::Negative : Polarity::Positive};
    const std::size_t base = b.labels.size();
    b.labels.insert(b.labels.end(), {q, q, n});
    b.pairs.push_back({base, base + 1, {base + 2}});
  }
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    b.h.push_back(gaussian_sample(rng, dim, 0.0, 1.0));
    b.z.push_back(chunk_to_complex(b.h.back()));
  }
  return b;
}

void BM_IbnLoss(benchmark::State& state) {
  const Batch b = make(static_cast<std::size_t>(state.range(0)), 64);
  const MaskMatrix mask = build_anticollision_mask(b.labels);
  for (auto _ : state) benchmark::DoNotOptimize(ibn_loss(b.h, b.pairs, mask, 20.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IbnLoss)->Arg(16)->Arg(64);

void BM_AngleLoss(benchmark::State& state) {
  const Batch b = make(16, 64);
  const AngleLossOptions opts{static_cast<AngleMode>(state.range(0)), false, {}};
  for (auto _ : state) benchmark::DoNotOptimize(angle_loss(b.z, b.pairs, 20.0, opts));
}
BENCHMARK(BM_AngleLoss)->Arg(static_cast<int>(AngleMode::ExactPhase))
    ->Arg(static_cast<int>(AngleMode::SurrogateSum));

void BM_CosineLoss(benchmark::State& state) {
  const Batch b = make(16, 64);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_loss(b.h, b.pairs, 20.0));
}
BENCHMARK(BM_CosineLoss);

void BM_ZrcpForwardBackward(benchmark::State& state) {
  const std::size_t d = static_cast<std::size_t>(state.range(0));
  RngStream rng(2);
  const ZrcpParams p = zrcp_init(d);
  const DenseVector h = gaussian_sample(rng, d, 0.0, 1.0);
  for (auto _ : state) {
    const ComplexEmbedding z = zrcp_forward(p, h);
    benchmark::DoNotOptimize(zrcp_backward(p, h, z));
  }
}
BENCHMARK(BM_ZrcpForwardBackward)->Arg(64)->Arg(256);

}  // namespace
