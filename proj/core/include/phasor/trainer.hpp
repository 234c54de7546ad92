#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phasor/complex_space.hpp"
#include "phasor/data_pipeline.hpp"
#include "phasor/embf.hpp"
#include "phasor/encoder.hpp"
#include "phasor/losses.hpp"
#include "phasor/masking.hpp"
#include "phasor/zrcp.hpp"

namespace phasor {

enum class Projection : std::uint8_t { Zrcp, HardChunk };
std::string_view to_string(Projection p);      // "zrcp" | "hard"
Projection parse_projection(std::string_view s);

// Micro-batch composition. Random mixes all triplets; Aspect draws each
// micro-batch from the triplets of a single query aspect.
enum class Batching : std::uint8_t { Random, Aspect };
std::string_view to_string(Batching b);  // "random" | "aspect"
Batching parse_batching(std::string_view s);

// Training-time encoder init scale; large enough that amplitudes carry a
// usable signal for the amplitude penalty.
inline constexpr double kDefaultTrainInitStd = 0.5;

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;  // triplets per micro-batch
  std::size_t grad_accum_steps = 2;
  Batching batching = Batching::Aspect;
  double peak_lr = 1e-3;
  // Linear warmup length in optimizer updates; unset means 5% of the run.
  std::optional<std::size_t> warmup_steps;
  LossWeights weights;
  Temperatures temps;
  Projection projection = Projection::Zrcp;
  AngleMode angle_mode = AngleMode::ExactPhase;
  bool paper_literal_sign = false;
  bool mask_enabled = true;
  bool bias_outside = false;
  double encoder_weight_decay = 0.01;
  double zrcp_weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t d_embed = 32;
  std::size_t d_out = 64;
  double init_std = kDefaultTrainInitStd;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Model {
  std::optional<ToyEncoderParams> encoder;  // absent when embeddings are frozen
  ZrcpParams zrcp;
  Projection projection = Projection::Zrcp;

  ComplexEmbedding project(std::span<const double> h) const;

  bool operator==(const Model&) const = default;
};

Model init_model(const TrainConfig& cfg, std::size_t vocab_size);
// Frozen-embedding model: projection only, input dimension `dim`.
Model init_projection_only(const TrainConfig& cfg, std::size_t dim);

// Parameters rounded to 32-bit storage precision.
Model round_to_storage(const Model& m);

// Named views over every trainable tensor, in a fixed order.
struct ParamView {
  std::string name;
  std::span<double> values;
  double weight_decay = 0.0;
};
std::vector<ParamView> parameters(Model& m, const TrainConfig& cfg);

// One unrolled batch item: tokens for the toy encoder or a row of a frozen
// embedding table.
struct BatchItem {
  TokenSequence tokens;
  std::optional<std::size_t> row;
  SemanticLabel label;
};

struct TripletBatch {
  std::vector<BatchItem> items;
  std::vector<PairIndex> pairs;
  std::vector<std::size_t> source_ids;  // triplet ids, for diagnostics
};

BatchItem to_item(const ContextBlock& b);

// Unrolls triplets as [query, positive, negatives...] per triplet.
TripletBatch make_batch(std::span<const Triplet> triplets, std::span<const std::size_t> ids = {});

struct OptimizerState {
  std::map<std::string, DenseVector> m;
  std::map<std::string, DenseVector> v;
  std::size_t step = 0;
};

struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double l_ibn = 0.0;
  double l_angle = 0.0;
  double l_cos = 0.0;
  double l_amp = 0.0;
  double l_total = 0.0;

  bool operator==(const StepMetrics&) const = default;
};

// Linear 0 -> peak over warmup, then linear decay to 0 at total_steps.
double lr_schedule(std::size_t step, double peak_lr, std::size_t warmup_steps,
                   std::size_t total_steps);

// Triplet ids of each micro-batch of one epoch, in training order.
std::vector<std::vector<std::size_t>> epoch_plan(std::span<const Triplet> triplets,
                                                 const TrainConfig& cfg, std::size_t epoch);
std::size_t total_updates(std::span<const Triplet> triplets, const TrainConfig& cfg);
std::size_t effective_warmup(const TrainConfig& cfg, std::size_t total_steps);

// One AdamW update with the given gradients (keyed like parameters()).
void adamw_update(Model& m, OptimizerState& opt, const std::map<std::string, DenseVector>& grads,
                  double lr, const TrainConfig& cfg);

// Sum-form loss components of one micro-batch.
struct BatchLosses {
  double ibn = 0.0;
  double angle = 0.0;
  double cos = 0.0;
  double amp = 0.0;  // item-mean amplitude penalty
  std::size_t anchors = 0;
  std::size_t items = 0;
};

// Forward + backward of one micro-batch. Ranking losses (ibn, angle, cos)
// are sums over anchors scaled by rank_scale. The amplitude penalty is a
// batch mean, so it is weighted by items * amp_scale. Gradients are added
// into `grads`.
BatchLosses accumulate_batch(const Model& m, const TripletBatch& batch, const TrainConfig& cfg,
                             const EmbeddingTable* table, double rank_scale, double amp_scale,
                             std::map<std::string, DenseVector>& grads);

// Mini-batch trainer with gradient accumulation. Losses are averaged per
// anchor over each update window.
class Trainer {
 public:
  Trainer(Model model, TrainConfig cfg, std::size_t total_steps,
          const EmbeddingTable* table = nullptr);

  // Accumulates one micro-batch; after every grad_accum_steps micro-batches
  // the optimizer is stepped and that step's metrics are returned.
  std::optional<StepMetrics> train_step(const TripletBatch& batch);
  // Applies a pending partial window, if any.
  std::optional<StepMetrics> flush();

  const Model& model() const { return model_; }
  const OptimizerState& optimizer() const { return opt_; }

 private:
  std::optional<StepMetrics> apply();

  Model model_;
  TrainConfig cfg_;
  std::size_t total_steps_;
  std::size_t warmup_;
  const EmbeddingTable* table_;
  OptimizerState opt_;
  std::vector<TripletBatch> pending_;
};

struct Checkpoint {
  Model model;
  TrainConfig config;
  std::size_t step = 0;
  std::vector<StepMetrics> history;
  std::string config_hash;
};

using StepCallback = std::function<void(const StepMetrics&)>;

// Deterministic training run. Blocks carrying a table_row are looked up in
// `table` (frozen embeddings); otherwise the toy encoder is trained.
Checkpoint train(Model initial, std::span<const Triplet> triplets, const TrainConfig& cfg,
                 const EmbeddingTable* table = nullptr, const StepCallback& on_step = {});

void to_json(nlohmann::json& j, const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& cfg);

// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainConfig& cfg);
std::string fnv1a_hex(std::string_view bytes);
std::string metrics_to_jsonl(std::span<const StepMetrics> history);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Final representation of one item: concatenated [re ; im] of the projected
// embedding.
DenseVector represent(const Model& m, const BatchItem& item, const EmbeddingTable* table);
ComplexEmbedding represent_complex(const Model& m, const BatchItem& item,
                                   const EmbeddingTable* table);

}  // namespace phasor
