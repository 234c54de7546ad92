#pragma once

#include <span>
#include <string_view>

#include "phasor/numerics.hpp"

namespace phasor {

// z = re + i*im, one complex number per coordinate.
struct ComplexEmbedding {
  DenseVector re;
  DenseVector im;

  std::size_t half_dim() const { return re.size(); }
  bool operator==(const ComplexEmbedding&) const = default;
};

enum class AngleMode {
  ExactPhase,    // mean |arg(z_k / w_k)| over coordinates, in [0, pi]
  SurrogateSum,  // |sum_k (re'_k + im'_k)| after amplitude normalization
};

std::string_view to_string(AngleMode mode);
AngleMode parse_angle_mode(std::string_view s);  // "exact" | "surrogate"

// Optional magnitude floor for complex division. Off (0) by default: a
// zero-magnitude coordinate in the divisor is an error.
struct DivisionPolicy {
  double magnitude_floor = 0.0;
};
inline constexpr double kDefaultMagnitudeFloor = 1e-12;

// First half of h becomes the real part, second half the imaginary part.
ComplexEmbedding chunk_to_complex(std::span<const double> h);
// The hard-chunking projection: identical to chunk_to_complex.
ComplexEmbedding hard_chunk_projection(std::span<const double> h);
// Inverse of chunk_to_complex.
DenseVector to_real(const ComplexEmbedding& z);

ComplexEmbedding complex_divide(const ComplexEmbedding& z, const ComplexEmbedding& w,
                                DivisionPolicy policy = {});

double amplitude(const ComplexEmbedding& z);

ComplexEmbedding scaled(const ComplexEmbedding& z, double s);

double phase_delta(const ComplexEmbedding& z, const ComplexEmbedding& w, AngleMode mode,
                   DivisionPolicy policy = {});

struct PhaseDeltaGrad {
  double value = 0.0;
  ComplexEmbedding d_z;  // d value / d (re, im) of z
  ComplexEmbedding d_w;
};

// phase_delta plus its analytic gradient with respect to both arguments.
// At the non-differentiable points of |.| the subgradient 0 is returned.
PhaseDeltaGrad phase_delta_with_grad(const ComplexEmbedding& z, const ComplexEmbedding& w,
                                     AngleMode mode, DivisionPolicy policy = {});

// Distance of (z, w) to the nearest kink of phase_delta: for ExactPhase the
// minimum over coordinates of min(|theta_k|, pi - |theta_k|); for
// SurrogateSum the magnitude of the inner sum. Finite-difference checks skip
// inputs closer than 1e-4.
double phase_branch_distance(const ComplexEmbedding& z, const ComplexEmbedding& w, AngleMode mode);

}  // namespace phasor
