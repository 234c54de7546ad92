#pragma once

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "phasor/complex_space.hpp"
#include "phasor/masking.hpp"
#include "phasor/numerics.hpp"

namespace phasor {

// Identifies one input of a loss: item `index` of the batch, either as a
// real embedding h or as a complex embedding z (gradient stored as the
// concatenation [d/d re ; d/d im]).
struct InputId {
  enum class Space : std::uint8_t { Real, Complex };
  Space space = Space::Real;
  std::size_t index = 0;

  auto operator<=>(const InputId&) const = default;
};

struct LossOutput {
  double value = 0.0;
  std::map<InputId, DenseVector> grads;
};

struct LossWeights {
  double ibn = 1.0;
  double angle = 1.0;
  double cos = 1.0;
  double amp = 0.0;
};

struct Temperatures {
  double ibn = 20.0;
  double angle = 20.0;
  double cos = 20.0;
};

void validate(const LossWeights& w);
void validate(const Temperatures& t);

// Masked in-batch negative loss over unit-normalized embeddings:
//   L = -sum_i log( e^{s(i,p_i) tau} / (e^{s(i,p_i) tau} + sum_{j != p_i} e^{s(i,j) tau} (1 - M_ij)) )
// The designated positive is never masked.
LossOutput ibn_loss(std::span<const DenseVector> embs, std::span<const PairIndex> pairs,
                    const MaskMatrix& mask, double tau);

struct AngleLossOptions {
  AngleMode mode = AngleMode::ExactPhase;
  // false: exponent tau * (dtheta(z, w) - dtheta(z, n)), which shrinks the
  // positive-pair phase gap relative to the negatives.
  // true: the reversed exponent tau * (dtheta(z, n) - dtheta(z, w)).
  bool paper_literal_sign = false;
  DivisionPolicy division{};
};

// L = sum_i log(1 + sum_{n in N(i)} exp(exponent)); negatives come from the
// anchor's own triplet.
LossOutput angle_loss(std::span<const ComplexEmbedding> cembs, std::span<const PairIndex> pairs,
                      double tau, const AngleLossOptions& opts = {});

// CoSENT-style ranking loss, summed over anchors:
//   L = sum_i log(1 + sum_{n in N(i)} exp(tau (cos(h_i, h_n) - cos(h_i, h_{p_i}))))
LossOutput cosine_loss(std::span<const DenseVector> embs, std::span<const PairIndex> pairs,
                       double tau);

// Mean over items of the squared deviation of |z_i| from the mean amplitude
// of the item's aspect group.
LossOutput amplitude_penalty(std::span<const ComplexEmbedding> cembs, std::span<const int> aspects);

struct LossComponents {
  LossOutput ibn;
  LossOutput angle;
  LossOutput cos;
  std::optional<LossOutput> amp;
};

// Weighted sum of the components; gradient maps are merged additively per
// input id. Components with weight 0 contribute nothing.
LossOutput total_loss(const LossComponents& components, const LossWeights& weights);

// |d/dtheta (1 - cos theta)| = |sin theta|.
double cosine_gradient_magnitude(double theta);
// |d/dtheta (tau * theta)| = tau, independent of theta.
double angle_gradient_magnitude(double theta, double tau);

}  // namespace phasor
