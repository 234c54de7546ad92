#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phasor/analysis.hpp"
#include "phasor/data_pipeline.hpp"
#include "phasor/embf.hpp"
#include "phasor/trainer.hpp"

namespace phasor {

// Everything needed to reproduce one run: data generation, extraction,
// triplet construction, training and evaluation.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  GeneratorConfig data;
  ExtractionConfig extract;
  TripletConfig triplets;
  TrainConfig train;  // train.seed mirrors `seed`
  EvalOptions eval;
  std::size_t sim_group_size = 5;  // items per polarity in similarity batches
  std::optional<std::filesystem::path> frozen_embeddings;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys and mistyped values throw
// ValidationError.
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);

// JSON Schema (draft-07) describing the config file.
nlohmann::json experiment_schema();

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
// Hash of the config with the seed removed.
std::string experiment_hash(const ExperimentConfig& cfg);
std::filesystem::path run_directory(const std::filesystem::path& out, const ExperimentConfig& cfg);

struct Dataset {
  std::vector<std::string> aspect_names;
  std::optional<Lexicon> lexicon;  // synthetic data only
  std::vector<SyntheticReview> corpus;
  std::vector<ContextBlock> train_blocks;
  std::vector<ContextBlock> test_blocks;
  TripletSet triplets;
  std::optional<EmbeddingTable> table;  // frozen embeddings only

  const EmbeddingTable* table_ptr() const { return table ? &*table : nullptr; }
};

// Splits by review (or by table row for frozen embeddings), extracts blocks
// and builds triplets from the training side.
Dataset build_dataset(const ExperimentConfig& cfg);

Model initial_model(const ExperimentConfig& cfg, const Dataset& ds);
Checkpoint train_experiment(const ExperimentConfig& cfg, const Dataset& ds,
                            const StepCallback& on_step = {});

std::vector<LabeledEmbedding> embed_blocks(const Model& m, std::span<const ContextBlock> blocks,
                                           const EmbeddingTable* table);
AspectMetrics evaluate_model(const Model& m, const Dataset& ds, const EvalOptions& opts);

// One similarity batch per aspect with both polarities in the test split:
// up to `group_size` positive then `group_size` negative blocks.
std::vector<std::pair<int, SimReport>> aspect_similarity(const Model& m, const Dataset& ds,
                                                         std::size_t group_size,
                                                         const Model* comparison = nullptr);

struct SimSummary {
  double pos_pos = 0.0;
  double neg_neg = 0.0;
  double pos_neg = 0.0;
  double margin = 0.0;  // mean over aspects of min(pos_pos, neg_neg) - pos_neg
};
SimSummary summarize_similarity(std::span<const std::pair<int, SimReport>> reports);

std::vector<AmpItem> amplitude_items(const Model& m, const Dataset& ds);

// Configuration legs of the ablation grid.
enum class Leg : std::uint8_t { Full, HardChunk, NoMask, NoAngle, AmpPenalty };
inline constexpr Leg kAllLegs[] = {Leg::Full, Leg::HardChunk, Leg::NoMask, Leg::NoAngle,
                                   Leg::AmpPenalty};
std::string_view to_string(Leg leg);
ExperimentConfig apply_leg(ExperimentConfig cfg, Leg leg);

struct LegResult {
  Leg leg = Leg::Full;
  Checkpoint checkpoint;
  AspectMetrics metrics;
  SimSummary similarity;
  double mean_aspect_amp_std = 0.0;
};

LegResult run_leg(const ExperimentConfig& base, const Dataset& ds, Leg leg);
std::string ablation_csv(std::span<const LegResult> results);

// Exclusive lock on a run directory, released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace phasor
