#include "phasor/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "phasor/error.hpp"

namespace phasor {

using nlohmann::json;

namespace {

// Strict reader for one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ValidationError(section_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(section_ + "." + key + ": " + e.what());
    }
  }

  const json* raw(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void finish() const {
    for (const auto& [key, v] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(section_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

json generator_json(const GeneratorConfig& g) {
  return {{"n_reviews", g.n_reviews},
          {"n_aspects", g.n_aspects},
          {"anchors_per_aspect", g.anchors_per_aspect},
          {"tokens_per_grade", g.tokens_per_grade},
          {"n_fillers", g.n_fillers},
          {"min_segments", g.min_segments},
          {"max_segments", g.max_segments},
          {"continuation_prob", g.continuation_prob},
          {"neutral_prob", g.neutral_prob},
          {"intensity_weights", g.intensity_weights},
          {"max_fillers", g.max_fillers},
          {"filler_rate", g.filler_rate},
          {"aspect_names", g.aspect_names}};
}

void read_generator(const json& j, GeneratorConfig& g) {
  ObjectReader r(j, "data");
  r.get("n_reviews", g.n_reviews);
  r.get("n_aspects", g.n_aspects);
  r.get("anchors_per_aspect", g.anchors_per_aspect);
  r.get("tokens_per_grade", g.tokens_per_grade);
  r.get("n_fillers", g.n_fillers);
  r.get("min_segments", g.min_segments);
  r.get("max_segments", g.max_segments);
  r.get("continuation_prob", g.continuation_prob);
  r.get("neutral_prob", g.neutral_prob);
  r.get("intensity_weights", g.intensity_weights);
  r.get("max_fillers", g.max_fillers);
  r.get("filler_rate", g.filler_rate);
  r.get("aspect_names", g.aspect_names);
  r.finish();
}

std::vector<std::size_t> shuffled_indices(std::size_t n, const RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  RngStream local = rng.split(0x73706c);
  local.shuffle(idx);
  return idx;
}

std::size_t test_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

json schema_of(const json& value, const std::string& key) {
  static const std::map<std::string, std::vector<std::string>> enums = {
      {"projection", {"zrcp", "hard"}},
      {"angle_mode", {"exact", "surrogate"}},
      {"batching", {"random", "aspect"}},
      {"classifier", {"centroid", "knn"}}};
  if (key == "warmup_steps") return {{"type", {"integer", "null"}}, {"minimum", 0}};
  if (key == "frozen_embeddings") return {{"type", {"string", "null"}}};
  if (key == "aspect_names") return {{"type", "array"}, {"items", {{"type", "string"}}}};
  if (value.is_object()) {
    json props = json::object();
    for (const auto& [k, v] : value.items()) props[k] = schema_of(v, k);
    return {{"type", "object"}, {"additionalProperties", false}, {"properties", props}};
  }
  if (value.is_array()) {
    return {{"type", "array"},
            {"items", {{"type", "number"}, {"minimum", 0}}},
            {"minItems", value.size()},
            {"maxItems", value.size()}};
  }
  if (value.is_boolean()) return {{"type", "boolean"}};
  if (value.is_number_unsigned()) return {{"type", "integer"}, {"minimum", 0}};
  if (value.is_number()) return {{"type", "number"}};
  if (value.is_string()) {
    json s = {{"type", "string"}};
    if (auto it = enums.find(key); it != enums.end()) s["enum"] = it->second;
    return s;
  }
  return json::object();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must be in (0, 1)");
  }
  if (sim_group_size == 0) throw ValidationError("sim_group_size must be >= 1");
  if (extract.max_seq_len == 0) throw ValidationError("extract.max_seq_len must be >= 1");
  if (eval.k == 0) throw ValidationError("eval.k must be >= 1");
  data.validate();
  triplets.validate();
  train.validate();
}

void to_json(json& j, const ExperimentConfig& c) {
  json train = c.train;
  train.erase("seed");
  j = {{"seed", c.seed},
       {"test_fraction", c.test_fraction},
       {"data", generator_json(c.data)},
       {"extract", {{"top_k", c.extract.top_k}, {"max_seq_len", c.extract.max_seq_len}}},
       {"triplets",
        {{"mix", c.triplets.mix},
         {"n_negatives", c.triplets.n_negatives},
         {"max_seq_len", c.triplets.max_seq_len}}},
       {"train", train},
       {"eval", {{"classifier", std::string(to_string(c.eval.classifier))}, {"k", c.eval.k}}},
       {"sim_group_size", c.sim_group_size},
       {"frozen_embeddings",
        c.frozen_embeddings ? json(c.frozen_embeddings->string()) : json(nullptr)}};
}

void from_json(const json& j, ExperimentConfig& c) {
  ObjectReader r(j, "config");
  r.get("seed", c.seed);
  r.get("test_fraction", c.test_fraction);
  r.get("sim_group_size", c.sim_group_size);
  if (const json* d = r.raw("data")) read_generator(*d, c.data);
  if (const json* e = r.raw("extract")) {
    ObjectReader er(*e, "extract");
    er.get("top_k", c.extract.top_k);
    er.get("max_seq_len", c.extract.max_seq_len);
    er.finish();
  }
  if (const json* t = r.raw("triplets")) {
    ObjectReader tr(*t, "triplets");
    tr.get("mix", c.triplets.mix);
    tr.get("n_negatives", c.triplets.n_negatives);
    tr.get("max_seq_len", c.triplets.max_seq_len);
    tr.finish();
  }
  if (const json* t = r.raw("train")) {
    if (t->is_object() && t->contains("seed")) {
      throw ValidationError("train: 'seed' is set at the top level of the config");
    }
    from_json(*t, c.train);
  }
  if (const json* e = r.raw("eval")) {
    ObjectReader er(*e, "eval");
    std::string classifier(to_string(c.eval.classifier));
    er.get("classifier", classifier);
    c.eval.classifier = parse_classifier(classifier);
    er.get("k", c.eval.k);
    er.finish();
  }
  if (const json* f = r.raw("frozen_embeddings")) {
    if (f->is_null()) {
      c.frozen_embeddings.reset();
    } else if (f->is_string()) {
      c.frozen_embeddings = f->get<std::string>();
    } else {
      throw ValidationError("config.frozen_embeddings: expected a path or null");
    }
  }
  r.finish();
  c.train.seed = c.seed;
}

json experiment_schema() {
  json s = schema_of(json(ExperimentConfig{}), "");
  s["$schema"] = "http://json-schema.org/draft-07/schema#";
  s["title"] = "phasor experiment config";
  return s;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  ExperimentConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

std::string experiment_hash(const ExperimentConfig& cfg) {
  json j = cfg;
  j.erase("seed");
  return fnv1a_hex(j.dump());
}

std::filesystem::path run_directory(const std::filesystem::path& out, const ExperimentConfig& cfg) {
  return out / (experiment_hash(cfg) + "-s" + std::to_string(cfg.seed));
}

// --- dataset ----------------------------------------------------------------------

namespace {

Dataset build_synthetic(const ExperimentConfig& cfg) {
  Dataset ds;
  ds.lexicon.emplace(cfg.data);
  const Lexicon& lex = *ds.lexicon;
  for (std::size_t a = 0; a < lex.n_aspects(); ++a) ds.aspect_names.push_back(lex.aspect_name(static_cast<int>(a)));
  const RngStream rng(cfg.seed);
  ds.corpus = generate_corpus(cfg.data, lex, rng.split(0x636f72));

  const auto order = shuffled_indices(ds.corpus.size(), rng);
  const std::size_t n_test = test_count(ds.corpus.size(), cfg.test_fraction);
  std::vector<bool> is_test(ds.corpus.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

  std::vector<TokenSequence> train_sentences;
  for (std::size_t r = 0; r < ds.corpus.size(); ++r) {
    if (is_test[r]) continue;
    train_sentences.insert(train_sentences.end(), ds.corpus[r].sentences.begin(),
                           ds.corpus[r].sentences.end());
  }
  const TfidfModel tfidf = tfidf_scores(train_sentences);
  for (std::size_t r = 0; r < ds.corpus.size(); ++r) {
    auto blocks = extract_context_blocks(ds.corpus[r], lex, tfidf, cfg.extract);
    auto& dst = is_test[r] ? ds.test_blocks : ds.train_blocks;
    dst.insert(dst.end(), std::make_move_iterator(blocks.begin()), std::make_move_iterator(blocks.end()));
  }
  ds.triplets = generate_triplets(ds.train_blocks, cfg.triplets, rng);
  return ds;
}

Dataset build_frozen(const ExperimentConfig& cfg) {
  Dataset ds;
  ds.table = load_external_embeddings(*cfg.frozen_embeddings);
  const EmbeddingTable& t = *ds.table;
  std::set<std::string> names;
  for (const auto& l : t.labels) names.insert(l.aspect);
  ds.aspect_names.assign(names.begin(), names.end());

  const RngStream rng(cfg.seed);
  const auto order = shuffled_indices(t.rows, rng);
  const std::size_t n_test = test_count(t.rows, cfg.test_fraction);
  std::vector<bool> is_test(t.rows, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  for (std::size_t i = 0; i < t.rows; ++i) {
    const auto& l = t.labels[i];
    ContextBlock b;
    b.label = {static_cast<int>(std::distance(names.begin(), names.find(l.aspect))), l.polarity};
    b.source_review = static_cast<int>(i);
    b.text_len = l.text_len;
    b.intensity = l.intensity ? static_cast<int>(std::lround(*l.intensity)) : 0;
    b.table_row = i;
    (is_test[i] ? ds.test_blocks : ds.train_blocks).push_back(std::move(b));
  }
  // Table rows cannot be fused or compared lexically.
  TripletConfig tc = cfg.triplets;
  tc.mix = {1.0, 0.0, 0.0};
  ds.triplets = generate_triplets(ds.train_blocks, tc, rng);
  return ds;
}

TrainConfig seeded(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

}  // namespace

Dataset build_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  return cfg.frozen_embeddings ? build_frozen(cfg) : build_synthetic(cfg);
}

Model initial_model(const ExperimentConfig& cfg, const Dataset& ds) {
  if (ds.table) return init_projection_only(seeded(cfg), ds.table->dim);
  return init_model(seeded(cfg), ds.lexicon->vocab_size());
}

Checkpoint train_experiment(const ExperimentConfig& cfg, const Dataset& ds, const StepCallback& on_step) {
  return train(initial_model(cfg, ds), ds.triplets.triplets, seeded(cfg), ds.table_ptr(), on_step);
}

std::vector<LabeledEmbedding> embed_blocks(const Model& m, std::span<const ContextBlock> blocks,
                                           const EmbeddingTable* table) {
  std::vector<LabeledEmbedding> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back({represent(m, to_item(b), table), b.label});
  return out;
}

AspectMetrics evaluate_model(const Model& m, const Dataset& ds, const EvalOptions& opts) {
  const auto ref = embed_blocks(m, ds.train_blocks, ds.table_ptr());
  const auto test = embed_blocks(m, ds.test_blocks, ds.table_ptr());
  return evaluate(ref, test, opts);
}

std::vector<std::pair<int, SimReport>> aspect_similarity(const Model& m, const Dataset& ds,
                                                         std::size_t group_size,
                                                         const Model* comparison) {
  std::map<int, std::pair<std::vector<const ContextBlock*>, std::vector<const ContextBlock*>>> groups;
  for (const auto& b : ds.test_blocks) {
    auto& [pos, neg] = groups[b.label.aspect];
    if (b.label.polarity == Polarity::Positive && pos.size() < group_size) pos.push_back(&b);
    if (b.label.polarity == Polarity::Negative && neg.size() < group_size) neg.push_back(&b);
  }
  std::vector<std::pair<int, SimReport>> out;
  for (const auto& [aspect, g] : groups) {
    if (g.first.empty() || g.second.empty()) continue;
    std::vector<DenseVector> embs, base;
    std::vector<SemanticLabel> labels;
    for (const auto* list : {&g.first, &g.second}) {
      for (const ContextBlock* b : *list) {
        embs.push_back(represent(m, to_item(*b), ds.table_ptr()));
        if (comparison) base.push_back(represent(*comparison, to_item(*b), ds.table_ptr()));
        labels.push_back(b->label);
      }
    }
    if (comparison) {
      const SimReport before = similarity_report(base, labels);
      out.emplace_back(aspect, similarity_report(embs, labels, &before));
    } else {
      out.emplace_back(aspect, similarity_report(embs, labels));
    }
  }
  return out;
}

SimSummary summarize_similarity(std::span<const std::pair<int, SimReport>> reports) {
  SimSummary s;
  if (reports.empty()) throw ValidationError("no aspect has both polarities in the test split");
  for (const auto& [a, r] : reports) {
    s.pos_pos += r.pos_pos;
    s.neg_neg += r.neg_neg;
    s.pos_neg += r.pos_neg;
    s.margin += r.margin();
  }
  const double n = static_cast<double>(reports.size());
  s.pos_pos /= n;
  s.neg_neg /= n;
  s.pos_neg /= n;
  s.margin /= n;
  return s;
}

std::vector<AmpItem> amplitude_items(const Model& m, const Dataset& ds) {
  std::vector<AmpItem> out;
  for (std::size_t i = 0; i < ds.test_blocks.size(); ++i) {
    const ContextBlock& b = ds.test_blocks[i];
    AmpItem it;
    it.id = i;
    it.label = b.label;
    it.amplitude = amplitude(represent_complex(m, to_item(b), ds.table_ptr()));
    it.text_len = b.text_len;
    if (ds.table && b.table_row) {
      it.intensity = ds.table->labels[*b.table_row].intensity;
    } else if (b.intensity > 0) {
      it.intensity = static_cast<double>(b.intensity);
    }
    out.push_back(it);
  }
  return out;
}

// --- ablation -------------------------------------------------------------------------

std::string_view to_string(Leg leg) {
  switch (leg) {
    case Leg::Full: return "full";
    case Leg::HardChunk: return "hard_chunk";
    case Leg::NoMask: return "no_mask";
    case Leg::NoAngle: return "no_angle";
    case Leg::AmpPenalty: return "amp_penalty";
  }
  return "unknown";
}

ExperimentConfig apply_leg(ExperimentConfig cfg, Leg leg) {
  switch (leg) {
    case Leg::Full: break;
    case Leg::HardChunk: cfg.train.projection = Projection::HardChunk; break;
    case Leg::NoMask: cfg.train.mask_enabled = false; break;
    case Leg::NoAngle: cfg.train.weights.angle = 0.0; break;
    case Leg::AmpPenalty: cfg.train.weights.amp = 1.0; break;
  }
  return cfg;
}

LegResult run_leg(const ExperimentConfig& base, const Dataset& ds, Leg leg) {
  const ExperimentConfig cfg = apply_leg(base, leg);
  LegResult r;
  r.leg = leg;
  r.checkpoint = train_experiment(cfg, ds);
  r.metrics = evaluate_model(r.checkpoint.model, ds, cfg.eval);
  const auto sims = aspect_similarity(r.checkpoint.model, ds, cfg.sim_group_size);
  r.similarity = summarize_similarity(sims);
  const AmpReport amp = amplitude_report(amplitude_items(r.checkpoint.model, ds));
  for (const auto& [a, s] : amp.per_aspect) r.mean_aspect_amp_std += s.std;
  r.mean_aspect_amp_std /= static_cast<double>(amp.per_aspect.size());
  return r;
}

std::string ablation_csv(std::span<const LegResult> results) {
  std::string out = "leg,macro_f1,macro_acc,pos_pos,neg_neg,pos_neg,margin,mean_aspect_amp_std\n";
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : results) {
    out += std::string(to_string(r.leg)) + "," + num(r.metrics.macro_f1) + "," +
           num(r.metrics.macro_accuracy) + "," + num(r.similarity.pos_pos) + "," +
           num(r.similarity.neg_neg) + "," + num(r.similarity.pos_neg) + "," +
           num(r.similarity.margin) + "," + num(r.mean_aspect_amp_std) + "\n";
  }
  return out;
}

// --- run lock ---------------------------------------------------------------------------

RunLock::RunLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
  std::filesystem::create_directories(dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) throw IoError("run directory is locked by another process: " + dir.string());
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace phasor
