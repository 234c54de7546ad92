#include "phasor/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numbers>

#include <nlohmann/json.hpp>

#include "phasor/complex_space.hpp"
#include "phasor/encoder.hpp"
#include "phasor/error.hpp"
#include "phasor/masking.hpp"
#include "phasor/trainer.hpp"
#include "phasor/zrcp.hpp"

namespace phasor {

namespace {

struct Instance {
  std::vector<SemanticLabel> labels;
  std::vector<PairIndex> pairs;
  std::size_t dim = 2;
};

Instance random_instance(RngStream& rng, const GradCheckConfig& cfg) {
  Instance inst;
  const std::size_t half_max = std::max<std::size_t>(1, cfg.max_dim / 2);
  inst.dim = 2 * (1 + rng.uniform_int(half_max));
  while (true) {
    const std::size_t n_neg = 1 + rng.uniform_int(2);
    if (!inst.pairs.empty() && inst.labels.size() + 2 + n_neg > cfg.max_items) break;
    const SemanticLabel q{static_cast<int>(rng.uniform_int(2)),
                          rng.bernoulli(0.5) ? Polarity::Positive : Polarity::Negative};
    PairIndex p;
    p.anchor = inst.labels.size();
    inst.labels.push_back(q);
    p.positive = inst.labels.size();
    inst.labels.push_back(q);
    for (std::size_t k = 0; k < n_neg && inst.labels.size() < cfg.max_items; ++k) {
      const Polarity other = q.polarity == Polarity::Positive ? Polarity::Negative : Polarity::Positive;
      p.negatives.push_back(inst.labels.size());
      inst.labels.push_back({q.aspect, rng.bernoulli(0.8) ? other : Polarity::Neutral});
    }
    inst.pairs.push_back(std::move(p));
    if (rng.bernoulli(0.4)) break;
  }
  return inst;
}

std::vector<DenseVector> real_items(RngStream& rng, std::size_t n, std::size_t dim) {
  std::vector<DenseVector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(gaussian_sample(rng, dim, 0.0, 1.0));
  return out;
}

// Coordinates with magnitude in [0.5, 2] and uniform phase.
std::vector<ComplexEmbedding> complex_items(RngStream& rng, std::size_t n, std::size_t dim) {
  std::vector<ComplexEmbedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    ComplexEmbedding z;
    for (std::size_t k = 0; k < dim / 2; ++k) {
      const double r = 0.5 + 1.5 * rng.uniform();
      const double phi = std::numbers::pi * (2.0 * rng.uniform() - 1.0);
      z.re.push_back(r * std::cos(phi));
      z.im.push_back(r * std::sin(phi));
    }
    out.push_back(std::move(z));
  }
  return out;
}

DenseVector flatten(std::span<const DenseVector> v) {
  DenseVector out;
  for (const auto& x : v) out.insert(out.end(), x.begin(), x.end());
  return out;
}

std::vector<DenseVector> unflatten(std::span<const double> x, std::size_t n, std::size_t dim) {
  std::vector<DenseVector> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(x.begin() + i * dim, x.begin() + (i + 1) * dim);
  return out;
}

std::vector<DenseVector> to_real_all(std::span<const ComplexEmbedding> z) {
  std::vector<DenseVector> out;
  for (const auto& c : z) out.push_back(to_real(c));
  return out;
}

std::vector<ComplexEmbedding> to_complex_all(std::span<const double> x, std::size_t n, std::size_t dim) {
  std::vector<ComplexEmbedding> out;
  for (const auto& v : unflatten(x, n, dim)) out.push_back(chunk_to_complex(v));
  return out;
}

DenseVector grads_of(const LossOutput& out, InputId::Space space, std::size_t n, std::size_t dim) {
  DenseVector g;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = out.grads.find({space, i});
    if (it == out.grads.end()) {
      g.insert(g.end(), dim, 0.0);
    } else {
      g.insert(g.end(), it->second.begin(), it->second.end());
    }
  }
  return g;
}

bool near_branch(std::span<const ComplexEmbedding> z, std::span<const PairIndex> pairs, AngleMode mode,
                 double threshold) {
  for (const auto& p : pairs) {
    if (phase_branch_distance(z[p.anchor], z[p.positive], mode) < threshold) return true;
    for (std::size_t n : p.negatives) {
      if (phase_branch_distance(z[p.anchor], z[n], mode) < threshold) return true;
    }
  }
  return false;
}

class Checker {
 public:
  explicit Checker(const GradCheckConfig& cfg) : cfg_(cfg) {}

  void check(const std::string& component, const ScalarFunction& f, std::span<const double> x,
             std::span<const double> analytic) {
    auto& c = entry(component);
    DenseVector fd;
    try {
      fd = finite_difference_gradient(f, x, cfg_.eps);
    } catch (const OracleError& e) {
      throw OracleError(component + ": " + e.what(), e.component());
    }
    c.max_rel_error = std::max(c.max_rel_error, relative_error(analytic, fd));
    ++c.checked;
  }

  void exclude(const std::string& component) { ++entry(component).excluded; }

  std::vector<ComponentCheck> results() const {
    std::vector<ComponentCheck> out;
    for (const auto& name : order_) out.push_back(by_name_.at(name));
    return out;
  }

 private:
  ComponentCheck& entry(const std::string& name) {
    auto [it, inserted] = by_name_.try_emplace(name);
    if (inserted) {
      it->second.component = name;
      order_.push_back(name);
    }
    return it->second;
  }

  const GradCheckConfig& cfg_;
  std::map<std::string, ComponentCheck> by_name_;
  std::vector<std::string> order_;
};

void check_real_losses(Checker& ck, RngStream& rng, const Instance& inst, const GradCheckConfig& cfg) {
  const std::size_t n = inst.labels.size(), d = inst.dim;
  const auto h = real_items(rng, n, d);
  const DenseVector x = flatten(h);
  const MaskMatrix mask = build_anticollision_mask(inst.labels);

  const auto ibn = ibn_loss(h, inst.pairs, mask, cfg.temps.ibn);
  ck.check("ibn", [&](std::span<const double> v) {
    return ibn_loss(unflatten(v, n, d), inst.pairs, mask, cfg.temps.ibn).value;
  }, x, grads_of(ibn, InputId::Space::Real, n, d));

  const auto cos = cosine_loss(h, inst.pairs, cfg.temps.cos);
  ck.check("cos", [&](std::span<const double> v) {
    return cosine_loss(unflatten(v, n, d), inst.pairs, cfg.temps.cos).value;
  }, x, grads_of(cos, InputId::Space::Real, n, d));
}

void check_complex_losses(Checker& ck, RngStream& rng, const Instance& inst, const GradCheckConfig& cfg) {
  const std::size_t n = inst.labels.size(), d = inst.dim;
  const auto z = complex_items(rng, n, d);
  const DenseVector x = flatten(to_real_all(z));

  struct Variant {
    const char* name;
    AngleMode mode;
    bool literal;
  };
  for (const Variant& v : {Variant{"angle_exact", AngleMode::ExactPhase, false},
                           Variant{"angle_exact_literal_sign", AngleMode::ExactPhase, true},
                           Variant{"angle_surrogate", AngleMode::SurrogateSum, false}}) {
    if (near_branch(z, inst.pairs, v.mode, cfg.branch_exclusion)) {
      ck.exclude(v.name);
      continue;
    }
    const AngleLossOptions opts{v.mode, v.literal, {}};
    const auto out = angle_loss(z, inst.pairs, cfg.temps.angle, opts);
    ck.check(v.name, [&](std::span<const double> p) {
      return angle_loss(to_complex_all(p, n, d), inst.pairs, cfg.temps.angle, opts).value;
    }, x, grads_of(out, InputId::Space::Complex, n, d));
  }

  std::vector<int> aspects;
  for (const auto& l : inst.labels) aspects.push_back(l.aspect);
  const auto amp = amplitude_penalty(z, aspects);
  ck.check("amp", [&](std::span<const double> p) {
    return amplitude_penalty(to_complex_all(p, n, d), aspects).value;
  }, x, grads_of(amp, InputId::Space::Complex, n, d));
}

ZrcpParams random_zrcp(RngStream& rng, std::size_t d, bool bias_outside) {
  ZrcpParams p = zrcp_init(d, bias_outside);
  for (double& w : p.w_re.data) w = rng.normal(0.0, 0.3);
  for (double& w : p.w_im.data) w = rng.normal(0.0, 0.3);
  for (double& b : p.b_re) b = rng.normal(0.0, 0.3);
  for (double& b : p.b_im) b = rng.normal(0.0, 0.3);
  return p;
}

void check_zrcp(Checker& ck, RngStream& rng, std::size_t d) {
  for (bool outside : {false, true}) {
    const ZrcpParams p = random_zrcp(rng, d, outside);
    const DenseVector h = gaussian_sample(rng, d, 0.0, 1.0);
    const DenseVector g = gaussian_sample(rng, d, 0.0, 1.0);
    const ZrcpGradients grads = zrcp_backward(p, h, chunk_to_complex(g));

    DenseVector x = h;
    for (const auto* part : {&p.w_re.data, &p.b_re, &p.w_im.data, &p.b_im}) {
      x.insert(x.end(), part->begin(), part->end());
    }
    DenseVector analytic = grads.h;
    for (const auto* part : {&grads.w_re.data, &grads.b_re, &grads.w_im.data, &grads.b_im}) {
      analytic.insert(analytic.end(), part->begin(), part->end());
    }
    auto f = [&, outside](std::span<const double> v) {
      ZrcpParams q = zrcp_init(d, outside);
      std::size_t at = d;
      for (auto* part : {&q.w_re.data, &q.b_re, &q.w_im.data, &q.b_im}) {
        std::copy(v.begin() + at, v.begin() + at + part->size(), part->begin());
        at += part->size();
      }
      return dot(g, to_real(zrcp_forward(q, v.subspan(0, d))));
    };
    ck.check(outside ? "zrcp_bias_outside" : "zrcp", f, x, analytic);
  }
}

void check_encoder(Checker& ck, RngStream& rng, std::size_t d) {
  const std::size_t vocab = 6, d_embed = 3;
  ToyEncoderParams p = encoder_init(vocab, d_embed, d, rng, 0.5);
  for (double& b : p.head_b) b = rng.normal(0.0, 0.5);
  TokenSequence toks;
  const std::size_t len = 1 + rng.uniform_int(6);
  for (std::size_t i = 0; i < len; ++i) toks.push_back(static_cast<int>(rng.uniform_int(vocab)));
  const DenseVector g = gaussian_sample(rng, d, 0.0, 1.0);
  const EncoderGradients eg = encode_backward(p, toks, g);

  DenseVector x = p.token_table.data;
  x.insert(x.end(), p.head_w.data.begin(), p.head_w.data.end());
  x.insert(x.end(), p.head_b.begin(), p.head_b.end());
  DenseVector analytic(p.token_table.data.size(), 0.0);
  for (const auto& [tok, row] : eg.rows) {
    std::copy(row.begin(), row.end(), analytic.begin() + static_cast<std::ptrdiff_t>(tok * d_embed));
  }
  analytic.insert(analytic.end(), eg.head_w.data.begin(), eg.head_w.data.end());
  analytic.insert(analytic.end(), eg.head_b.begin(), eg.head_b.end());

  auto f = [&](std::span<const double> v) {
    ToyEncoderParams q = p;
    std::size_t at = 0;
    for (auto* part : {&q.token_table.data, &q.head_w.data, &q.head_b}) {
      std::copy(v.begin() + at, v.begin() + at + part->size(), part->begin());
      at += part->size();
    }
    return dot(g, encode(q, toks));
  };
  ck.check("encoder", f, x, analytic);
}

// Full forward/backward of one micro-batch through encoder, projection and
// every loss, against all model parameters.
void check_model(Checker& ck, RngStream& rng, const Instance& inst, const GradCheckConfig& cfg) {
  TrainConfig tc;
  tc.d_embed = 3;
  tc.d_out = inst.dim;
  tc.init_std = 1.5;
  tc.temps = cfg.temps;
  tc.weights = {1.0, 1.0, 1.0, 1.0};
  tc.seed = rng.next_u64();
  const std::size_t vocab = 8;
  Model m = init_model(tc, vocab);
  m.zrcp = random_zrcp(rng, inst.dim, false);

  TripletBatch batch;
  batch.pairs = inst.pairs;
  for (const auto& l : inst.labels) {
    BatchItem item;
    item.label = l;
    const std::size_t len = 2 + rng.uniform_int(4);
    for (std::size_t i = 0; i < len; ++i) item.tokens.push_back(static_cast<int>(rng.uniform_int(vocab)));
    batch.items.push_back(std::move(item));
  }

  std::vector<ComplexEmbedding> z;
  for (const auto& item : batch.items) z.push_back(represent_complex(m, item, nullptr));
  if (near_branch(z, batch.pairs, tc.angle_mode, cfg.branch_exclusion)) {
    ck.exclude("model");
    return;
  }

  std::map<std::string, DenseVector> grads;
  accumulate_batch(m, batch, tc, nullptr, 1.0, 1.0, grads);
  DenseVector x, analytic;
  for (const ParamView& pv : parameters(m, tc)) {
    x.insert(x.end(), pv.values.begin(), pv.values.end());
    auto it = grads.find(pv.name);
    if (it == grads.end()) {
      analytic.insert(analytic.end(), pv.values.size(), 0.0);
    } else {
      analytic.insert(analytic.end(), it->second.begin(), it->second.end());
    }
  }
  auto f = [&](std::span<const double> v) {
    Model q = m;
    std::size_t at = 0;
    for (ParamView& pv : parameters(q, tc)) {
      std::copy(v.begin() + at, v.begin() + at + pv.values.size(), pv.values.begin());
      at += pv.values.size();
    }
    std::map<std::string, DenseVector> unused;
    const BatchLosses l = accumulate_batch(q, batch, tc, nullptr, 1.0, 1.0, unused);
    return l.ibn + l.angle + l.cos + static_cast<double>(l.items) * l.amp;
  };
  ck.check("model", f, x, analytic);
}

}  // namespace

GradCheckReport run_grad_check(const GradCheckConfig& cfg) {
  if (cfg.instances == 0) throw ValidationError("grad-check: instances must be >= 1");
  if (cfg.max_items < 3) throw ValidationError("grad-check: max_items must be >= 3");
  if (cfg.max_dim < 2) throw ValidationError("grad-check: max_dim must be >= 2");
  validate(cfg.temps);
  const auto start = std::chrono::steady_clock::now();
  const RngStream root(cfg.seed);
  Checker ck(cfg);
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    RngStream rng = root.split(i);
    const Instance inst = random_instance(rng, cfg);
    check_real_losses(ck, rng, inst, cfg);
    check_complex_losses(ck, rng, inst, cfg);
    check_zrcp(ck, rng, inst.dim);
    check_encoder(ck, rng, inst.dim);
    check_model(ck, rng, inst, cfg);
  }
  GradCheckReport r;
  r.components = ck.results();
  r.tolerance = cfg.tolerance;
  for (const auto& c : r.components) r.max_rel_error = std::max(r.max_rel_error, c.max_rel_error);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void to_json(nlohmann::json& j, const GradCheckReport& r) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : r.components) {
    comps.push_back({{"component", c.component},
                     {"checked", c.checked},
                     {"excluded", c.excluded},
                     {"max_rel_error", c.max_rel_error}});
  }
  j = {{"components", comps},
       {"max_rel_error", r.max_rel_error},
       {"tolerance", r.tolerance},
       {"passed", r.passed()},
       {"seconds", r.seconds}};
}

}  // namespace phasor
