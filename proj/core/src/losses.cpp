#include "phasor/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "phasor/error.hpp"

namespace phasor {

void validate(const LossWeights& w) {
  for (double v : {w.ibn, w.angle, w.cos, w.amp}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be finite and >= 0");
  }
  if (w.ibn == 0.0 && w.angle == 0.0 && w.cos == 0.0 && w.amp == 0.0) {
    throw ValidationError("at least one loss weight must be > 0");
  }
}

void validate(const Temperatures& t) {
  for (double v : {t.ibn, t.angle, t.cos}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("temperatures must be finite and > 0");
  }
}

namespace {

struct Normalized {
  std::vector<DenseVector> unit;
  std::vector<double> norms;
};

Normalized normalize_all(std::span<const DenseVector> embs, const char* who) {
  Normalized out;
  out.unit.reserve(embs.size());
  out.norms.reserve(embs.size());
  for (std::size_t i = 0; i < embs.size(); ++i) {
    require_finite(embs[i], who);
    const double n = norm(embs[i]);
    if (n == 0.0) {
      throw NumericError(std::string(who) + ": zero-norm embedding at item " + std::to_string(i));
    }
    out.unit.push_back(scaled(embs[i], 1.0 / n));
    out.norms.push_back(n);
  }
  return out;
}

// Maps d L / d u (u = h / |h|) to d L / d h.
DenseVector unnormalize_grad(std::span<const double> u, double n, std::span<const double> g_u) {
  const double proj = dot(u, g_u);
  DenseVector g(g_u.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = (g_u[k] - proj * u[k]) / n;
  return g;
}

void check_pair(const PairIndex& p, std::size_t n) {
  auto bad = [n](std::size_t i) { return i >= n; };
  if (bad(p.anchor) || bad(p.positive) ||
      std::any_of(p.negatives.begin(), p.negatives.end(), bad)) {
    throw DimensionError("pair index out of range for batch of " + std::to_string(n));
  }
  if (p.anchor == p.positive) throw DataIntegrityError("pair positive equals its anchor");
}

// log(sum exp(x)) with max subtraction; also fills softmax weights.
double log_sum_exp(std::span<const double> x, std::span<double> softmax) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    softmax[k] = std::exp(x[k] - m);
    s += softmax[k];
  }
  for (double& v : softmax) v /= s;
  return m + std::log(s);
}

std::size_t common_dim(std::span<const DenseVector> embs, const char* who) {
  if (embs.empty()) return 0;
  const std::size_t d = embs[0].size();
  for (const auto& e : embs) {
    if (e.size() != d || d == 0) throw DimensionError(std::string(who) + ": ragged embeddings");
  }
  return d;
}

// Ranking term shared by cosine and angle losses: log(1 + sum_n exp(t_n)).
// Returns value; writes dL/dt_n into `weights`.
double log1p_sum_exp(std::span<const double> t, std::vector<double>& weights) {
  std::vector<double> x(t.size() + 1, 0.0);
  std::copy(t.begin(), t.end(), x.begin() + 1);
  std::vector<double> sm(x.size());
  const double v = log_sum_exp(x, sm);
  weights.assign(sm.begin() + 1, sm.end());
  return v;
}

}  // namespace

LossOutput ibn_loss(std::span<const DenseVector> embs, std::span<const PairIndex> pairs,
                    const MaskMatrix& mask, double tau) {
  const std::size_t n = embs.size();
  if (mask.size() != n) throw DimensionError("ibn_loss: mask size does not match batch");
  if (!(tau > 0.0)) throw ValidationError("ibn_loss: tau must be > 0");
  const std::size_t d = common_dim(embs, "ibn_loss");
  const Normalized nz = normalize_all(embs, "ibn_loss");

  std::vector<DenseVector> grad_u(n, DenseVector(d, 0.0));
  double total = 0.0;
  std::vector<std::size_t> members;
  std::vector<double> logits, sm;
  for (const PairIndex& pr : pairs) {
    check_pair(pr, n);
    const std::size_t i = pr.anchor;
    members.assign(1, pr.positive);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != pr.positive && !mask(i, j) && j != i) members.push_back(j);
    }
    logits.resize(members.size());
    sm.resize(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      logits[k] = tau * dot(nz.unit[i], nz.unit[members[k]]);
    }
    const double lse = log_sum_exp(logits, sm);
    if (!std::isfinite(lse)) throw NumericError("ibn_loss: non-finite similarity at anchor " +
                                                std::to_string(i));
    total += lse - logits[0];
    for (std::size_t k = 0; k < members.size(); ++k) {
      const double c = tau * (sm[k] - (k == 0 ? 1.0 : 0.0));
      const std::size_t j = members[k];
      axpy(c, nz.unit[j], grad_u[i]);
      axpy(c, nz.unit[i], grad_u[j]);
    }
  }

  LossOutput out;
  out.value = total;
  for (std::size_t i = 0; i < n; ++i) {
    out.grads.emplace(InputId{InputId::Space::Real, i},
                      unnormalize_grad(nz.unit[i], nz.norms[i], grad_u[i]));
  }
  return out;
}

LossOutput angle_loss(std::span<const ComplexEmbedding> cembs, std::span<const PairIndex> pairs,
                      double tau, const AngleLossOptions& opts) {
  const std::size_t n = cembs.size();
  if (!(tau > 0.0)) throw ValidationError("angle_loss: tau must be > 0");
  const std::size_t half = n ? cembs[0].half_dim() : 0;
  std::vector<ComplexEmbedding> grad(n, ComplexEmbedding{DenseVector(half, 0.0),
                                                         DenseVector(half, 0.0)});
  const double sgn = opts.paper_literal_sign ? -1.0 : 1.0;

  auto delta = [&](std::size_t i, std::size_t j) {
    try {
      return phase_delta_with_grad(cembs[i], cembs[j], opts.mode, opts.division);
    } catch (const DivisionSingularityError& e) {
      throw DivisionSingularityError("angle_loss: pair (" + std::to_string(i) + ", " +
                                         std::to_string(j) + "): " + e.what(),
                                     e.coordinate());
    }
  };
  auto accumulate = [&](std::size_t i, std::size_t j, const PhaseDeltaGrad& g, double c) {
    axpy(c, g.d_z.re, grad[i].re);
    axpy(c, g.d_z.im, grad[i].im);
    axpy(c, g.d_w.re, grad[j].re);
    axpy(c, g.d_w.im, grad[j].im);
  };

  double total = 0.0;
  std::vector<double> t, w;
  for (const PairIndex& pr : pairs) {
    check_pair(pr, n);
    if (pr.negatives.empty()) continue;
    const std::size_t i = pr.anchor;
    const PhaseDeltaGrad pos = delta(i, pr.positive);
    std::vector<PhaseDeltaGrad> negs;
    t.clear();
    for (std::size_t j : pr.negatives) {
      negs.push_back(delta(i, j));
      t.push_back(sgn * tau * (pos.value - negs.back().value));
    }
    total += log1p_sum_exp(t, w);
    double w_sum = 0.0;
    for (std::size_t k = 0; k < negs.size(); ++k) {
      accumulate(i, pr.negatives[k], negs[k], -sgn * tau * w[k]);
      w_sum += w[k];
    }
    accumulate(i, pr.positive, pos, sgn * tau * w_sum);
  }

  LossOutput out;
  out.value = total;
  for (std::size_t i = 0; i < n; ++i) {
    out.grads.emplace(InputId{InputId::Space::Complex, i}, to_real(grad[i]));
  }
  return out;
}

LossOutput cosine_loss(std::span<const DenseVector> embs, std::span<const PairIndex> pairs,
                       double tau) {
  const std::size_t n = embs.size();
  if (!(tau > 0.0)) throw ValidationError("cosine_loss: tau must be > 0");
  const std::size_t d = common_dim(embs, "cosine_loss");
  const Normalized nz = normalize_all(embs, "cosine_loss");
  std::vector<DenseVector> grad_u(n, DenseVector(d, 0.0));

  double total = 0.0;
  std::vector<double> t, w;
  for (const PairIndex& pr : pairs) {
    check_pair(pr, n);
    if (pr.negatives.empty()) continue;
    const std::size_t i = pr.anchor;
    const double cos_pos = dot(nz.unit[i], nz.unit[pr.positive]);
    t.clear();
    for (std::size_t j : pr.negatives) t.push_back(tau * (dot(nz.unit[i], nz.unit[j]) - cos_pos));
    total += log1p_sum_exp(t, w);
    double w_sum = 0.0;
    for (std::size_t k = 0; k < pr.negatives.size(); ++k) {
      const std::size_t j = pr.negatives[k];
      axpy(tau * w[k], nz.unit[j], grad_u[i]);
      axpy(tau * w[k], nz.unit[i], grad_u[j]);
      w_sum += w[k];
    }
    axpy(-tau * w_sum, nz.unit[pr.positive], grad_u[i]);
    axpy(-tau * w_sum, nz.unit[i], grad_u[pr.positive]);
  }

  LossOutput out;
  out.value = total;
  for (std::size_t i = 0; i < n; ++i) {
    out.grads.emplace(InputId{InputId::Space::Real, i},
                      unnormalize_grad(nz.unit[i], nz.norms[i], grad_u[i]));
  }
  return out;
}

LossOutput amplitude_penalty(std::span<const ComplexEmbedding> cembs,
                             std::span<const int> aspects) {
  if (cembs.empty()) throw ValidationError("amplitude_penalty: empty batch");
  if (aspects.size() != cembs.size()) {
    throw DimensionError("amplitude_penalty: aspects and embeddings differ in length");
  }
  const std::size_t n = cembs.size();
  std::vector<double> amp(n);
  std::map<int, std::pair<double, std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    amp[i] = amplitude(cembs[i]);
    auto& g = groups[aspects[i]];
    g.first += amp[i];
    g.second += 1;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  LossOutput out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = groups.at(aspects[i]);
    const double dev = amp[i] - g.first / static_cast<double>(g.second);
    out.value += dev * dev * inv_n;
    // The group-mean term's own derivative cancels because deviations sum to 0.
    const double g_amp = 2.0 * dev * inv_n;
    const double s = amp[i] > 0.0 ? g_amp / amp[i] : 0.0;
    out.grads.emplace(InputId{InputId::Space::Complex, i},
                      scaled(to_real(cembs[i]), s));
  }
  return out;
}

LossOutput total_loss(const LossComponents& components, const LossWeights& weights) {
  std::vector<std::pair<const LossOutput*, double>> parts = {
      {&components.ibn, weights.ibn}, {&components.angle, weights.angle},
      {&components.cos, weights.cos}};
  if (components.amp) parts.emplace_back(&*components.amp, weights.amp);

  // Components over the same space must cover the same inputs.
  std::map<InputId::Space, const LossOutput*> first_of_space;
  for (const auto& [c, w] : parts) {
    std::map<InputId::Space, std::size_t> count;
    for (const auto& [id, g] : c->grads) ++count[id.space];
    for (const auto& [space, k] : count) {
      auto [it, inserted] = first_of_space.try_emplace(space, c);
      if (inserted) continue;
      const LossOutput* ref = it->second;
      for (const auto& [id, g] : c->grads) {
        if (id.space != space) continue;
        auto r = ref->grads.find(id);
        if (r == ref->grads.end() || r->second.size() != g.size()) {
          throw ValidationError("total_loss: mismatched input ids across components");
        }
      }
      std::size_t ref_count = 0;
      for (const auto& [id, g] : ref->grads) ref_count += id.space == space;
      if (ref_count != k) throw ValidationError("total_loss: mismatched input ids across components");
    }
  }

  LossOutput out;
  for (const auto& [c, w] : parts) {
    if (w == 0.0) continue;
    for (const auto& [id, g] : c->grads) {
      auto [it, inserted] = out.grads.try_emplace(id, DenseVector(g.size(), 0.0));
      axpy(w, g, it->second);
    }
    out.value += w * c->value;
  }
  return out;
}

double cosine_gradient_magnitude(double theta) { return std::abs(std::sin(theta)); }

double angle_gradient_magnitude(double /*theta*/, double tau) { return std::abs(tau); }

}  // namespace phasor
