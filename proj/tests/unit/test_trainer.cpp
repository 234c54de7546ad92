#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "phasor/error.hpp"
#include "phasor/experiment.hpp"
#include "phasor/trainer.hpp"
#include "test_support.hpp"

namespace phasor {
namespace {

constexpr Polarity kPos = Polarity::Positive;
constexpr Polarity kNeg = Polarity::Negative;

ExperimentConfig small_experiment(std::uint64_t seed = 0) {
  ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.train.seed = seed;
  cfg.data.n_reviews = 200;
  return cfg;
}

const Dataset& small_dataset() {
  static const Dataset ds = build_dataset(small_experiment());
  return ds;
}

ContextBlock blk(int aspect, Polarity p, TokenSequence toks) {
  ContextBlock b;
  b.label = {aspect, p};
  b.tokens = std::move(toks);
  return b;
}

TEST(LrSchedule, MatchesOracleTable) {
  const auto& fx = testing::oracle_fixtures()["lr_schedule"];
  const double peak = fx["peak"].get<double>();
  const auto warmup = fx["warmup"].get<std::size_t>();
  const auto total = fx["total"].get<std::size_t>();
  for (const auto& row : fx["rows"]) {
    EXPECT_NEAR(lr_schedule(row[0].get<std::size_t>(), peak, warmup, total), row[1].get<double>(), 1e-18);
  }
}

TEST(LrSchedule, WarmupEndpoints) {
  EXPECT_EQ(lr_schedule(0, 2e-5, 500, 10000), 0.0);
  EXPECT_EQ(lr_schedule(500, 2e-5, 500, 10000), 2e-5);
  TrainConfig cfg;
  EXPECT_EQ(effective_warmup(cfg, 1000), 50u);
  cfg.warmup_steps = 7;
  EXPECT_EQ(effective_warmup(cfg, 1000), 7u);
}

TEST(Batching, AspectPlanCoversEveryTripletOnceWithSingleAspectBatches) {
  const auto& trips = small_dataset().triplets.triplets;
  TrainConfig cfg;
  const auto plan = epoch_plan(trips, cfg, 0);
  std::multiset<std::size_t> seen;
  for (const auto& batch : plan) {
    EXPECT_LE(batch.size(), cfg.batch_size);
    std::set<int> aspects;
    for (std::size_t id : batch) {
      seen.insert(id);
      aspects.insert(trips[id].query.label.aspect);
    }
    EXPECT_EQ(aspects.size(), 1u);
  }
  EXPECT_EQ(seen.size(), trips.size());
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), trips.size());
  EXPECT_NE(epoch_plan(trips, cfg, 0), epoch_plan(trips, cfg, 1));
  EXPECT_EQ(epoch_plan(trips, cfg, 3), epoch_plan(trips, cfg, 3));
}

TEST(Batching, RandomPlanChunksEvenly) {
  const auto& trips = small_dataset().triplets.triplets;
  TrainConfig cfg;
  cfg.batching = Batching::Random;
  const auto plan = epoch_plan(trips, cfg, 0);
  EXPECT_EQ(plan.size(), (trips.size() + cfg.batch_size - 1) / cfg.batch_size);
  EXPECT_EQ(parse_batching(to_string(Batching::Random)), Batching::Random);
  EXPECT_THROW(parse_batching("sorted"), ValidationError);
}

TEST(MakeBatch, UnrollsQueryPositiveNegatives) {
  const std::vector<Triplet> trips{
      {blk(0, kPos, {1}), blk(0, kPos, {2}), {blk(0, kNeg, {3}), blk(0, kNeg, {4})}},
      {blk(1, kNeg, {5}), blk(1, kNeg, {6}), {blk(1, kPos, {7})}}};
  const TripletBatch b = make_batch(trips, std::vector<std::size_t>{10, 11});
  ASSERT_EQ(b.items.size(), 7u);
  EXPECT_EQ(b.pairs, (std::vector<PairIndex>{{0, 1, {2, 3}}, {4, 5, {6}}}));
  EXPECT_EQ(b.source_ids, (std::vector<std::size_t>{10, 11}));
  EXPECT_EQ(b.items[6].label, (SemanticLabel{1, kPos}));
}

TEST(TrainStep, DegenerateBatchOnlyDecaysWeights) {
  TrainConfig cfg;
  cfg.weights = {1.0, 0.0, 0.0, 0.0};
  cfg.grad_accum_steps = 1;
  cfg.warmup_steps = 0;
  const Model m0 = init_model(cfg, 6);
  Trainer tr(m0, cfg, 10);
  const std::vector<Triplet> trips{{blk(0, kPos, {1, 2}), blk(0, kPos, {1, 2}), {}}};
  const auto sm = tr.train_step(make_batch(trips));
  ASSERT_TRUE(sm);
  EXPECT_EQ(sm->l_total, 0.0);
  const double lr = lr_schedule(1, cfg.peak_lr, 0, 10);
  const auto& before = m0.encoder->token_table.data;
  const auto& after = tr.model().encoder->token_table.data;
  for (std::size_t k = 0; k < before.size(); ++k) {
    EXPECT_DOUBLE_EQ(after[k], before[k] * (1.0 - lr * cfg.encoder_weight_decay));
  }
  EXPECT_EQ(tr.model().zrcp, m0.zrcp);
}

TEST(TrainStep, OneUpdatePerAccumulationWindow) {
  TrainConfig cfg;
  cfg.grad_accum_steps = 4;
  cfg.batch_size = 32;
  const auto& trips = small_dataset().triplets.triplets;
  Trainer tr(init_model(cfg, small_dataset().lexicon->vocab_size()), cfg, 100);
  std::size_t updates = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const auto batch = make_batch(std::span(trips).subspan(i * 4, 4));
    const auto sm = tr.train_step(batch);
    EXPECT_EQ(sm.has_value(), (i + 1) % 4 == 0);
    updates += sm.has_value();
  }
  EXPECT_EQ(updates, 2u);
  EXPECT_EQ(tr.optimizer().step, 2u);
  EXPECT_FALSE(tr.flush());
}

TEST(TrainStep, MaskDisabledUsesPlainInBatchNegatives) {
  const std::vector<Triplet> trips{
      {blk(0, kPos, {1}), blk(0, kPos, {2}), {blk(0, kNeg, {3})}},
      {blk(0, kPos, {4}), blk(0, kPos, {5}), {blk(0, kNeg, {6})}}};
  TrainConfig cfg;
  const Model m = init_model(cfg, 8);
  const TripletBatch b = make_batch(trips);
  std::map<std::string, DenseVector> g1, g2;
  const BatchLosses masked = accumulate_batch(m, b, cfg, nullptr, 1.0, 1.0, g1);
  cfg.mask_enabled = false;
  const BatchLosses plain = accumulate_batch(m, b, cfg, nullptr, 1.0, 1.0, g2);
  std::vector<DenseVector> h;
  for (const auto& it : b.items) h.push_back(encode(*m.encoder, it.tokens));
  EXPECT_NEAR(plain.ibn, ibn_loss(h, b.pairs, identity_mask(h.size()), cfg.temps.ibn).value, 1e-12);
  EXPECT_GT(plain.ibn, masked.ibn);
}

TEST(TrainStep, NonFiniteLossReportsTriplets) {
  TrainConfig cfg;
  cfg.grad_accum_steps = 1;
  Model m = init_model(cfg, 8);
  m.encoder->token_table.data[0] = std::nan("");
  Trainer tr(m, cfg, 10);
  const std::vector<Triplet> trips{{blk(0, kPos, {0}), blk(0, kPos, {2}), {blk(0, kNeg, {3})}}};
  EXPECT_THROW(tr.train_step(make_batch(trips)), NumericError);
}

TEST(Train, SameSeedSameHistoryAndLossDrops) {
  const ExperimentConfig cfg = small_experiment();
  const Checkpoint a = train_experiment(cfg, small_dataset());
  const Checkpoint b = train_experiment(cfg, small_dataset());
  EXPECT_EQ(metrics_to_jsonl(a.history), metrics_to_jsonl(b.history));
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.history.size(), total_updates(small_dataset().triplets.triplets, cfg.train));
  // Consecutive steps see different aspects, so compare windowed means.
  ASSERT_GE(a.history.size(), 20u);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += a.history[i].l_total;
    last += a.history[a.history.size() - 1 - i].l_total;
  }
  EXPECT_LT(last, 0.3 * first);
}

TEST(Train, CheckpointRoundTripIsBitExact) {
  testing::TempDir dir("ckpt");
  const Checkpoint a = train_experiment(small_experiment(), small_dataset());
  save_checkpoint(a, dir.path());
  const Checkpoint b = load_checkpoint(dir.path());
  EXPECT_EQ(b.model, round_to_storage(a.model));
  EXPECT_EQ(b.step, a.step);
  EXPECT_EQ(b.history, a.history);
  EXPECT_EQ(b.config_hash, config_hash(a.config));
  save_checkpoint(b, dir.path() / "again");
  for (const char* f : {"manifest.json", "encoder.token_table.embf", "zrcp.W_re.embf"}) {
    EXPECT_EQ(testing::slurp(dir.path() / f), testing::slurp(dir.path() / "again" / f)) << f;
  }
}

TEST(Train, CorruptCheckpointIsFormatError) {
  testing::TempDir dir("bad");
  save_checkpoint(train_experiment(small_experiment(), small_dataset()), dir.path());
  std::ofstream(dir.path() / "manifest.json") << "{\"format\": \"something-else\"}";
  EXPECT_THROW(load_checkpoint(dir.path()), FormatError);
}

TEST(TrainConfigJson, RoundTripAndStrictKeys) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.projection = Projection::HardChunk;
  cfg.angle_mode = AngleMode::SurrogateSum;
  cfg.weights.amp = 1.0;
  cfg.warmup_steps = 12;
  const nlohmann::json j = cfg;
  TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_EQ(back.warmup_steps, std::optional<std::size_t>(12));

  nlohmann::json bad = j;
  bad["learning_rate"] = 0.1;
  EXPECT_THROW(bad.get<TrainConfig>(), ValidationError);
  TrainConfig other = cfg;
  other.epochs = 4;
  EXPECT_NE(config_hash(other), config_hash(cfg));
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(TrainConfigValidate, RejectsBadValues) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.d_out = 7;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.peak_lr = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Model, ParameterNamesFollowProjection) {
  TrainConfig cfg;
  Model m = init_model(cfg, 10);
  std::vector<std::string> names;
  for (const auto& p : parameters(m, cfg)) names.push_back(p.name);
  EXPECT_EQ(names, (std::vector<std::string>{"encoder.token_table", "encoder.head_W", "encoder.head_b",
                                             "zrcp.W_re", "zrcp.b_re", "zrcp.W_im", "zrcp.b_im"}));
  cfg.projection = Projection::HardChunk;
  Model h = init_model(cfg, 10);
  EXPECT_EQ(parameters(h, cfg).size(), 3u);
  EXPECT_EQ(parse_projection("hard"), Projection::HardChunk);
}

TEST(Model, RepresentationIsConcatenatedComplexParts) {
  TrainConfig cfg;
  const Model m = init_model(cfg, 10);
  BatchItem it;
  it.tokens = {1, 2, 3};
  const DenseVector h = encode(*m.encoder, it.tokens);
  EXPECT_EQ(represent(m, it, nullptr), h);  // zero-initialized head is the identity
  EXPECT_EQ(represent_complex(m, it, nullptr), chunk_to_complex(h));
}

}  // namespace
}  // namespace phasor
