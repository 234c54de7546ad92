#include "phasor/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phasor/error.hpp"

namespace phasor {

using nlohmann::json;

std::string_view to_string(Projection p) { return p == Projection::Zrcp ? "zrcp" : "hard"; }

Projection parse_projection(std::string_view s) {
  if (s == "zrcp") return Projection::Zrcp;
  if (s == "hard") return Projection::HardChunk;
  throw ValidationError("unknown projection '" + std::string(s) + "' (expected zrcp|hard)");
}

std::string_view to_string(Batching b) { return b == Batching::Random ? "random" : "aspect"; }

Batching parse_batching(std::string_view s) {
  if (s == "random") return Batching::Random;
  if (s == "aspect") return Batching::Aspect;
  throw ValidationError("unknown batching '" + std::string(s) + "' (expected random|aspect)");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ValidationError("train: epochs must be >= 1");
  if (batch_size < 2) throw ValidationError("train: batch_size must be >= 2");
  if (grad_accum_steps == 0) throw ValidationError("train: grad_accum_steps must be >= 1");
  if (!(peak_lr >= 0.0)) throw ValidationError("train: peak_lr must be >= 0");
  if (d_out < 2 || d_out % 2 != 0) throw ValidationError("train: d_out must be even and >= 2");
  if (d_embed == 0) throw ValidationError("train: d_embed must be >= 1");
  if (!(init_std >= 0.0)) throw ValidationError("train: init_std must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
    throw ValidationError("train: invalid AdamW hyperparameters");
  }
  if (!(encoder_weight_decay >= 0.0 && zrcp_weight_decay >= 0.0)) {
    throw ValidationError("train: weight decay must be >= 0");
  }
  phasor::validate(weights);
  phasor::validate(temps);
}

ComplexEmbedding Model::project(std::span<const double> h) const {
  return projection == Projection::Zrcp ? zrcp_forward(zrcp, h) : hard_chunk_projection(h);
}

Model init_model(const TrainConfig& cfg, std::size_t vocab_size) {
  cfg.validate();
  RngStream rng = RngStream(cfg.seed).split(1);
  Model m;
  m.encoder = encoder_init(vocab_size, cfg.d_embed, cfg.d_out, rng, cfg.init_std);
  m.zrcp = zrcp_init(cfg.d_out, cfg.bias_outside);
  m.projection = cfg.projection;
  return m;
}

Model init_projection_only(const TrainConfig& cfg, std::size_t dim) {
  cfg.validate();
  Model m;
  m.zrcp = zrcp_init(dim, cfg.bias_outside);
  m.projection = cfg.projection;
  return m;
}

namespace {

void round_values(std::vector<double>& v) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace

Model round_to_storage(const Model& m) {
  Model r = m;
  if (r.encoder) {
    round_values(r.encoder->token_table.data);
    round_values(r.encoder->head_w.data);
    round_values(r.encoder->head_b);
  }
  round_values(r.zrcp.w_re.data);
  round_values(r.zrcp.b_re);
  round_values(r.zrcp.w_im.data);
  round_values(r.zrcp.b_im);
  return r;
}

std::vector<ParamView> parameters(Model& m, const TrainConfig& cfg) {
  std::vector<ParamView> out;
  if (m.encoder) {
    const double wd = cfg.encoder_weight_decay;
    out.push_back({"encoder.token_table", m.encoder->token_table.data, wd});
    out.push_back({"encoder.head_W", m.encoder->head_w.data, wd});
    out.push_back({"encoder.head_b", m.encoder->head_b, wd});
  }
  if (m.projection == Projection::Zrcp) {
    const double wd = cfg.zrcp_weight_decay;
    out.push_back({"zrcp.W_re", m.zrcp.w_re.data, wd});
    out.push_back({"zrcp.b_re", m.zrcp.b_re, wd});
    out.push_back({"zrcp.W_im", m.zrcp.w_im.data, wd});
    out.push_back({"zrcp.b_im", m.zrcp.b_im, wd});
  }
  return out;
}

BatchItem to_item(const ContextBlock& b) { return {b.tokens, b.table_row, b.label}; }

TripletBatch make_batch(std::span<const Triplet> triplets, std::span<const std::size_t> ids) {
  TripletBatch batch;
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const Triplet& tr = triplets[t];
    PairIndex p;
    p.anchor = batch.items.size();
    batch.items.push_back(to_item(tr.query));
    p.positive = batch.items.size();
    batch.items.push_back(to_item(tr.positive));
    for (const auto& n : tr.negatives) {
      p.negatives.push_back(batch.items.size());
      batch.items.push_back(to_item(n));
    }
    batch.pairs.push_back(std::move(p));
    batch.source_ids.push_back(ids.empty() ? t : ids[t]);
  }
  return batch;
}

// --- schedule & optimizer ---------------------------------------------------------

double lr_schedule(std::size_t step, double peak_lr, std::size_t warmup_steps,
                   std::size_t total_steps) {
  if (step <= warmup_steps) {
    if (warmup_steps == 0) return peak_lr;
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (step >= total_steps) return 0.0;
  return peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup_steps);
}

std::vector<std::vector<std::size_t>> epoch_plan(std::span<const Triplet> triplets,
                                                 const TrainConfig& cfg, std::size_t epoch) {
  RngStream rng = RngStream(cfg.seed).split(1000 + epoch);
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    groups[cfg.batching == Batching::Aspect ? triplets[i].query.label.aspect : 0].push_back(i);
  }
  std::vector<std::vector<std::size_t>> plan;
  for (auto& [key, ids] : groups) {
    rng.shuffle(ids);
    for (std::size_t start = 0; start < ids.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(ids.size(), start + cfg.batch_size);
      plan.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(start),
                        ids.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  if (cfg.batching == Batching::Aspect) rng.shuffle(plan);
  return plan;
}

std::size_t total_updates(std::span<const Triplet> triplets, const TrainConfig& cfg) {
  std::map<int, std::size_t> sizes;
  for (const auto& t : triplets) ++sizes[cfg.batching == Batching::Aspect ? t.query.label.aspect : 0];
  std::size_t batches = 0;
  for (const auto& [key, n] : sizes) batches += (n + cfg.batch_size - 1) / cfg.batch_size;
  return cfg.epochs * ((batches + cfg.grad_accum_steps - 1) / cfg.grad_accum_steps);
}

std::size_t effective_warmup(const TrainConfig& cfg, std::size_t total_steps) {
  if (cfg.warmup_steps) return *cfg.warmup_steps;
  return static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(total_steps)));
}

void adamw_update(Model& m, OptimizerState& opt, const std::map<std::string, DenseVector>& grads,
                  double lr, const TrainConfig& cfg) {
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (ParamView& p : parameters(m, cfg)) {
    auto g_it = grads.find(p.name);
    const std::size_t n = p.values.size();
    auto& mom = opt.m[p.name];
    auto& var = opt.v[p.name];
    mom.resize(n, 0.0);
    var.resize(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = g_it == grads.end() ? 0.0 : g_it->second[i];
      mom[i] = cfg.beta1 * mom[i] + (1.0 - cfg.beta1) * g;
      var[i] = cfg.beta2 * var[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = mom[i] / bc1;
      const double v_hat = var[i] / bc2;
      p.values[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.adam_eps) + p.weight_decay * p.values[i]);
    }
  }
}

// --- forward / backward -------------------------------------------------------------

namespace {

DenseVector& grad_buffer(std::map<std::string, DenseVector>& grads, const std::string& name,
                         std::size_t n) {
  auto& g = grads[name];
  if (g.size() != n) g.assign(n, 0.0);
  return g;
}

DenseVector embed(const Model& m, const BatchItem& item, const EmbeddingTable* table) {
  if (item.row) {
    if (!table) throw ValidationError("batch item references an embedding row but no table is loaded");
    return table->row(*item.row);
  }
  if (!m.encoder) throw ValidationError("batch item has tokens but the model has no encoder");
  return encode(*m.encoder, item.tokens);
}

DenseVector grad_of(const LossOutput& out, InputId id, std::size_t dim) {
  auto it = out.grads.find(id);
  return it == out.grads.end() ? DenseVector(dim, 0.0) : it->second;
}

}  // namespace

DenseVector represent(const Model& m, const BatchItem& item, const EmbeddingTable* table) {
  return to_real(represent_complex(m, item, table));
}

ComplexEmbedding represent_complex(const Model& m, const BatchItem& item,
                                   const EmbeddingTable* table) {
  return m.project(embed(m, item, table));
}

BatchLosses accumulate_batch(const Model& m, const TripletBatch& batch, const TrainConfig& cfg,
                             const EmbeddingTable* table, double rank_scale, double amp_scale,
                             std::map<std::string, DenseVector>& grads) {
  const std::size_t n = batch.items.size();
  std::vector<DenseVector> h(n);
  std::vector<ComplexEmbedding> z(n);
  std::vector<SemanticLabel> labels(n);
  std::vector<int> aspects(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = embed(m, batch.items[i], table);
    z[i] = m.project(h[i]);
    labels[i] = batch.items[i].label;
    aspects[i] = labels[i].aspect;
  }
  const MaskMatrix mask = cfg.mask_enabled ? build_anticollision_mask(labels) : identity_mask(n);

  LossComponents comp;
  comp.ibn = ibn_loss(h, batch.pairs, mask, cfg.temps.ibn);
  comp.angle = angle_loss(z, batch.pairs, cfg.temps.angle,
                          {cfg.angle_mode, cfg.paper_literal_sign, {}});
  comp.cos = cosine_loss(h, batch.pairs, cfg.temps.cos);
  comp.amp = amplitude_penalty(z, aspects);

  BatchLosses out{comp.ibn.value, comp.angle.value, comp.cos.value, comp.amp->value,
                  batch.pairs.size(), n};
  const LossWeights scaled_w{cfg.weights.ibn * rank_scale, cfg.weights.angle * rank_scale,
                             cfg.weights.cos * rank_scale,
                             cfg.weights.amp * amp_scale * static_cast<double>(n)};
  const LossOutput total = total_loss(comp, scaled_w);

  for (std::size_t i = 0; i < n; ++i) {
    DenseVector gh = grad_of(total, {InputId::Space::Real, i}, h[i].size());
    const DenseVector gz_flat = grad_of(total, {InputId::Space::Complex, i}, h[i].size());
    const ComplexEmbedding gz = chunk_to_complex(gz_flat);
    if (m.projection == Projection::Zrcp) {
      const ZrcpGradients zg = zrcp_backward(m.zrcp, h[i], gz);
      const std::size_t hd = m.zrcp.half_dim();
      axpy(1.0, zg.w_re.data, grad_buffer(grads, "zrcp.W_re", hd * hd));
      axpy(1.0, zg.b_re, grad_buffer(grads, "zrcp.b_re", hd));
      axpy(1.0, zg.w_im.data, grad_buffer(grads, "zrcp.W_im", hd * hd));
      axpy(1.0, zg.b_im, grad_buffer(grads, "zrcp.b_im", hd));
      axpy(1.0, zg.h, gh);
    } else {
      axpy(1.0, gz_flat, gh);
    }
    if (!batch.items[i].row && m.encoder) {
      const ToyEncoderParams& enc = *m.encoder;
      const EncoderGradients eg = encode_backward(enc, batch.items[i].tokens, gh);
      axpy(1.0, eg.head_w.data, grad_buffer(grads, "encoder.head_W", eg.head_w.data.size()));
      axpy(1.0, eg.head_b, grad_buffer(grads, "encoder.head_b", eg.head_b.size()));
      auto& table_grad = grad_buffer(grads, "encoder.token_table", enc.token_table.data.size());
      for (const auto& [tok, g] : eg.rows) {
        std::span<double> row(table_grad.data() + static_cast<std::size_t>(tok) * enc.d_embed(),
                              enc.d_embed());
        axpy(1.0, g, row);
      }
    }
  }
  return out;
}

// --- Trainer ------------------------------------------------------------------------

Trainer::Trainer(Model model, TrainConfig cfg, std::size_t total_steps, const EmbeddingTable* table)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      total_steps_(total_steps),
      warmup_(effective_warmup(cfg_, total_steps)),
      table_(table) {
  cfg_.validate();
}

std::optional<StepMetrics> Trainer::train_step(const TripletBatch& batch) {
  pending_.push_back(batch);
  if (pending_.size() < cfg_.grad_accum_steps) return std::nullopt;
  return apply();
}

std::optional<StepMetrics> Trainer::flush() {
  if (pending_.empty()) return std::nullopt;
  return apply();
}

std::optional<StepMetrics> Trainer::apply() {
  std::size_t anchors = 0, items = 0;
  for (const auto& b : pending_) {
    anchors += b.pairs.size();
    items += b.items.size();
  }
  const double rank_scale = 1.0 / static_cast<double>(std::max<std::size_t>(anchors, 1));
  const double amp_scale = 1.0 / static_cast<double>(std::max<std::size_t>(items, 1));

  std::map<std::string, DenseVector> grads;
  double ibn = 0.0, ang = 0.0, cos = 0.0, amp = 0.0;
  for (const auto& b : pending_) {
    const BatchLosses l = accumulate_batch(model_, b, cfg_, table_, rank_scale, amp_scale, grads);
    ibn += l.ibn;
    ang += l.angle;
    cos += l.cos;
    amp += l.amp * static_cast<double>(l.items);
  }
  StepMetrics sm;
  sm.l_ibn = ibn * rank_scale;
  sm.l_angle = ang * rank_scale;
  sm.l_cos = cos * rank_scale;
  sm.l_amp = amp * amp_scale;
  sm.l_total = cfg_.weights.ibn * sm.l_ibn + cfg_.weights.angle * sm.l_angle +
               cfg_.weights.cos * sm.l_cos + cfg_.weights.amp * sm.l_amp;

  bool finite = std::isfinite(sm.l_total);
  for (const auto& [name, g] : grads) finite = finite && all_finite(g);
  if (!finite) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << opt_.step + 1 << " (l_ibn=" << sm.l_ibn
        << ", l_angle=" << sm.l_angle << ", l_cos=" << sm.l_cos << ", l_amp=" << sm.l_amp
        << "); triplet ids:";
    for (const auto& b : pending_) {
      for (std::size_t id : b.source_ids) msg << ' ' << id;
    }
    throw NumericError(msg.str());
  }

  sm.step = opt_.step + 1;
  sm.lr = lr_schedule(sm.step, cfg_.peak_lr, warmup_, total_steps_);
  adamw_update(model_, opt_, grads, sm.lr, cfg_);
  pending_.clear();
  return sm;
}

Checkpoint train(Model initial, std::span<const Triplet> triplets, const TrainConfig& cfg,
                 const EmbeddingTable* table, const StepCallback& on_step) {
  cfg.validate();
  if (triplets.empty()) throw ValidationError("train: empty triplet set");
  const std::size_t total = total_updates(triplets, cfg);
  Trainer trainer(std::move(initial), cfg, total, table);
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.config_hash = config_hash(cfg);
  auto record = [&](const std::optional<StepMetrics>& sm) {
    if (!sm) return;
    ckpt.history.push_back(*sm);
    if (on_step) on_step(*sm);
  };

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (const auto& ids : epoch_plan(triplets, cfg, e)) {
      std::vector<Triplet> chunk;
      for (std::size_t id : ids) chunk.push_back(triplets[id]);
      record(trainer.train_step(make_batch(chunk, ids)));
    }
    record(trainer.flush());
  }
  ckpt.model = trainer.model();
  ckpt.step = trainer.optimizer().step;
  return ckpt;
}

// --- serialization --------------------------------------------------------------------

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"grad_accum_steps", c.grad_accum_steps},
           {"batching", std::string(to_string(c.batching))},
           {"peak_lr", c.peak_lr},
           {"warmup_steps", c.warmup_steps ? json(*c.warmup_steps) : json(nullptr)},
           {"w_ibn", c.weights.ibn},
           {"w_angle", c.weights.angle},
           {"w_cos", c.weights.cos},
           {"w_amp", c.weights.amp},
           {"tau_ibn", c.temps.ibn},
           {"tau_angle", c.temps.angle},
           {"tau_cos", c.temps.cos},
           {"projection", std::string(to_string(c.projection))},
           {"angle_mode", std::string(to_string(c.angle_mode))},
           {"paper_literal_sign", c.paper_literal_sign},
           {"mask", c.mask_enabled},
           {"bias_outside", c.bias_outside},
           {"encoder_weight_decay", c.encoder_weight_decay},
           {"zrcp_weight_decay", c.zrcp_weight_decay},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"adam_eps", c.adam_eps},
           {"d_embed", c.d_embed},
           {"d_out", c.d_out},
           {"init_std", c.init_std},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "grad_accum_steps") c.grad_accum_steps = v.get<std::size_t>();
      else if (key == "batching") c.batching = parse_batching(v.get<std::string>());
      else if (key == "peak_lr") c.peak_lr = v.get<double>();
      else if (key == "warmup_steps") c.warmup_steps = v.is_null() ? std::nullopt : std::optional(v.get<std::size_t>());
      else if (key == "w_ibn") c.weights.ibn = v.get<double>();
      else if (key == "w_angle") c.weights.angle = v.get<double>();
      else if (key == "w_cos") c.weights.cos = v.get<double>();
      else if (key == "w_amp") c.weights.amp = v.get<double>();
      else if (key == "tau_ibn") c.temps.ibn = v.get<double>();
      else if (key == "tau_angle") c.temps.angle = v.get<double>();
      else if (key == "tau_cos") c.temps.cos = v.get<double>();
      else if (key == "projection") c.projection = parse_projection(v.get<std::string>());
      else if (key == "angle_mode") c.angle_mode = parse_angle_mode(v.get<std::string>());
      else if (key == "paper_literal_sign") c.paper_literal_sign = v.get<bool>();
      else if (key == "mask") c.mask_enabled = v.get<bool>();
      else if (key == "bias_outside") c.bias_outside = v.get<bool>();
      else if (key == "encoder_weight_decay") c.encoder_weight_decay = v.get<double>();
      else if (key == "zrcp_weight_decay") c.zrcp_weight_decay = v.get<double>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "adam_eps") c.adam_eps = v.get<double>();
      else if (key == "d_embed") c.d_embed = v.get<std::size_t>();
      else if (key == "d_out") c.d_out = v.get<std::size_t>();
      else if (key == "init_std") c.init_std = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ValidationError("train config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw ValidationError("train config: bad value for '" + key + "': " + e.what());
    }
  }
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const TrainConfig& cfg) { return fnv1a_hex(json(cfg).dump()); }

namespace {

json metrics_json(const StepMetrics& s) {
  return json{{"step", s.step},       {"lr", s.lr},         {"l_ibn", s.l_ibn},
              {"l_angle", s.l_angle}, {"l_cos", s.l_cos},   {"l_amp", s.l_amp},
              {"l_total", s.l_total}};
}

StepMetrics metrics_from_json(const json& j) {
  return {j.at("step").get<std::size_t>(), j.at("lr").get<double>(),
          j.at("l_ibn").get<double>(),     j.at("l_angle").get<double>(),
          j.at("l_cos").get<double>(),     j.at("l_amp").get<double>(),
          j.at("l_total").get<double>()};
}

EmbfTensor vector_tensor(const DenseVector& v) {
  Matrix m(1, v.size());
  m.data = v;
  return to_embf(m);
}

}  // namespace

std::string metrics_to_jsonl(std::span<const StepMetrics> history) {
  std::string out;
  for (const auto& s : history) {
    out += metrics_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, EmbfTensor>> tensors;
  const Model& m = ckpt.model;
  if (m.encoder) {
    tensors.emplace_back("encoder.token_table", to_embf(m.encoder->token_table));
    tensors.emplace_back("encoder.head_W", to_embf(m.encoder->head_w));
    tensors.emplace_back("encoder.head_b", vector_tensor(m.encoder->head_b));
  }
  tensors.emplace_back("zrcp.W_re", to_embf(m.zrcp.w_re));
  tensors.emplace_back("zrcp.b_re", vector_tensor(m.zrcp.b_re));
  tensors.emplace_back("zrcp.W_im", to_embf(m.zrcp.w_im));
  tensors.emplace_back("zrcp.b_im", vector_tensor(m.zrcp.b_im));

  json manifest;
  manifest["format"] = "phasor-checkpoint";
  manifest["version"] = 1;
  manifest["config_hash"] = ckpt.config_hash;
  manifest["config"] = ckpt.config;
  manifest["step"] = ckpt.step;
  manifest["projection"] = std::string(to_string(m.projection));
  manifest["bias_outside"] = m.zrcp.bias_outside;
  manifest["rng_algorithm"] = std::string(RngStream::kAlgorithm);
  json history = json::array();
  for (const auto& s : ckpt.history) history.push_back(metrics_json(s));
  manifest["metric_history"] = history;
  json tlist = json::array();
  for (const auto& [name, t] : tensors) {
    const std::string file = name + ".embf";
    write_embf(t, dir / file);
    tlist.push_back({{"name", name}, {"file", file}, {"rows", t.rows}, {"dim", t.dim}});
  }
  manifest["tensors"] = tlist;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing checkpoint manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "phasor-checkpoint") {
    throw FormatError("not a checkpoint manifest: " + dir.string());
  }
  Checkpoint ckpt;
  try {
    ckpt.config_hash = manifest.at("config_hash").get<std::string>();
    from_json(manifest.at("config"), ckpt.config);
    ckpt.step = manifest.at("step").get<std::size_t>();
    for (const auto& s : manifest.at("metric_history")) ckpt.history.push_back(metrics_from_json(s));
    std::map<std::string, EmbfTensor> tensors;
    for (const auto& t : manifest.at("tensors")) {
      tensors[t.at("name").get<std::string>()] = read_embf(dir / t.at("file").get<std::string>());
    }
    auto vec = [](const EmbfTensor& t) { return from_embf(t).data; };
    Model& m = ckpt.model;
    m.projection = parse_projection(manifest.at("projection").get<std::string>());
    if (tensors.count("encoder.token_table")) {
      m.encoder = ToyEncoderParams{from_embf(tensors.at("encoder.token_table")),
                                   from_embf(tensors.at("encoder.head_W")),
                                   vec(tensors.at("encoder.head_b"))};
    }
    m.zrcp.w_re = from_embf(tensors.at("zrcp.W_re"));
    m.zrcp.b_re = vec(tensors.at("zrcp.b_re"));
    m.zrcp.w_im = from_embf(tensors.at("zrcp.W_im"));
    m.zrcp.b_im = vec(tensors.at("zrcp.b_im"));
    m.zrcp.bias_outside = manifest.at("bias_outside").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest: " + std::string(e.what()));
  } catch (const std::out_of_range& e) {
    throw FormatError("checkpoint is missing a tensor: " + std::string(e.what()));
  }
  return ckpt;
}

}  // namespace phasor
