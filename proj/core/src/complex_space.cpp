#include "phasor/complex_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "phasor/error.hpp"

namespace phasor {

std::string_view to_string(AngleMode mode) {
  return mode == AngleMode::ExactPhase ? "exact" : "surrogate";
}

AngleMode parse_angle_mode(std::string_view s) {
  if (s == "exact") return AngleMode::ExactPhase;
  if (s == "surrogate") return AngleMode::SurrogateSum;
  throw ValidationError("unknown angle mode '" + std::string(s) + "' (expected exact|surrogate)");
}

ComplexEmbedding chunk_to_complex(std::span<const double> h) {
  if (h.empty() || h.size() % 2 != 0) {
    throw DimensionError("chunk_to_complex: dimension must be even and >= 2, got " +
                         std::to_string(h.size()));
  }
  const std::size_t half = h.size() / 2;
  return {DenseVector(h.begin(), h.begin() + half), DenseVector(h.begin() + half, h.end())};
}

ComplexEmbedding hard_chunk_projection(std::span<const double> h) { return chunk_to_complex(h); }

DenseVector to_real(const ComplexEmbedding& z) { return concat(z.re, z.im); }

namespace {

void require_compatible(const ComplexEmbedding& z, const ComplexEmbedding& w, const char* op) {
  if (z.re.size() != z.im.size() || w.re.size() != w.im.size() || z.re.size() != w.re.size() ||
      z.re.empty()) {
    throw DimensionError(std::string(op) + ": incompatible complex embeddings");
  }
}

// |w_k|^2 with the optional floor applied; throws on an exact singularity.
double divisor_magnitude_sq(const ComplexEmbedding& w, std::size_t k, DivisionPolicy policy) {
  const double n = w.re[k] * w.re[k] + w.im[k] * w.im[k];
  if (n > policy.magnitude_floor) return n;
  if (policy.magnitude_floor > 0.0) return policy.magnitude_floor;
  throw DivisionSingularityError(
      "complex_divide: divisor has zero magnitude at coordinate " + std::to_string(k), k);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

ComplexEmbedding complex_divide(const ComplexEmbedding& z, const ComplexEmbedding& w,
                                DivisionPolicy policy) {
  require_compatible(z, w, "complex_divide");
  const std::size_t n = z.half_dim();
  ComplexEmbedding q{DenseVector(n), DenseVector(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const double a = z.re[k], b = z.im[k], c = w.re[k], d = w.im[k];
    const double den = divisor_magnitude_sq(w, k, policy);
    q.re[k] = (a * c + b * d) / den;
    q.im[k] = (b * c - a * d) / den;
  }
  return q;
}

double amplitude(const ComplexEmbedding& z) { return std::sqrt(dot(z.re, z.re) + dot(z.im, z.im)); }

ComplexEmbedding scaled(const ComplexEmbedding& z, double s) {
  return {phasor::scaled(z.re, s), phasor::scaled(z.im, s)};
}

double phase_delta(const ComplexEmbedding& z, const ComplexEmbedding& w, AngleMode mode,
                   DivisionPolicy policy) {
  const ComplexEmbedding q = complex_divide(z, w, policy);
  const std::size_t n = q.half_dim();
  if (mode == AngleMode::ExactPhase) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += std::abs(std::atan2(q.im[k], q.re[k]));
    return sum / static_cast<double>(n);
  }
  const double az = amplitude(z);
  if (az == 0.0) throw NumericError("phase_delta: zero-amplitude query in surrogate mode");
  const double ratio = az / amplitude(w);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += q.re[k] / ratio + q.im[k] / ratio;
  return std::abs(sum);
}

PhaseDeltaGrad phase_delta_with_grad(const ComplexEmbedding& z, const ComplexEmbedding& w,
                                     AngleMode mode, DivisionPolicy policy) {
  require_compatible(z, w, "phase_delta_with_grad");
  const std::size_t n = z.half_dim();
  PhaseDeltaGrad out{0.0, {DenseVector(n, 0.0), DenseVector(n, 0.0)},
                     {DenseVector(n, 0.0), DenseVector(n, 0.0)}};

  if (mode == AngleMode::ExactPhase) {
    // arg(z_k / w_k) = arg z_k - arg w_k locally, so the partials are those
    // of atan2 on each factor.
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double a = z.re[k], b = z.im[k], c = w.re[k], d = w.im[k];
      const double den = divisor_magnitude_sq(w, k, policy);
      const double theta = std::atan2((b * c - a * d) / den, (a * c + b * d) / den);
      sum += std::abs(theta);
      const double s = sign(theta) * inv_n;
      const double zz = a * a + b * b;
      if (s == 0.0 || zz == 0.0) continue;
      out.d_z.re[k] = s * (-b / zz);
      out.d_z.im[k] = s * (a / zz);
      out.d_w.re[k] = s * (d / den);
      out.d_w.im[k] = s * (-c / den);
    }
    out.value = sum * inv_n;
    return out;
  }

  const double az = amplitude(z);
  const double aw = amplitude(w);
  if (az == 0.0) throw NumericError("phase_delta: zero-amplitude query in surrogate mode");
  const double f = aw / az;
  std::vector<double> den(n), p(n);
  double t = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = z.re[k], b = z.im[k], c = w.re[k], d = w.im[k];
    den[k] = divisor_magnitude_sq(w, k, policy);
    p[k] = a * c + b * d + b * c - a * d;
    t += p[k] / den[k];
  }
  const double s = f * t;
  out.value = std::abs(s);
  const double sg = sign(s);
  if (sg == 0.0) return out;
  const double df_dz = -aw / (az * az * az);  // times z component
  const double df_dw = aw > 0.0 ? 1.0 / (aw * az) : 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = z.re[k], b = z.im[k], c = w.re[k], d = w.im[k];
    const double nk = den[k];
    out.d_z.re[k] = sg * (t * df_dz * a + f * (c - d) / nk);
    out.d_z.im[k] = sg * (t * df_dz * b + f * (c + d) / nk);
    out.d_w.re[k] = sg * (t * df_dw * c + f * ((a + b) / nk - 2.0 * c * p[k] / (nk * nk)));
    out.d_w.im[k] = sg * (t * df_dw * d + f * ((b - a) / nk - 2.0 * d * p[k] / (nk * nk)));
  }
  return out;
}

double phase_branch_distance(const ComplexEmbedding& z, const ComplexEmbedding& w,
                             AngleMode mode) {
  const ComplexEmbedding q = complex_divide(z, w, {kDefaultMagnitudeFloor});
  if (mode == AngleMode::ExactPhase) {
    double best = std::numbers::pi;
    for (std::size_t k = 0; k < q.half_dim(); ++k) {
      const double t = std::abs(std::atan2(q.im[k], q.re[k]));
      best = std::min({best, t, std::numbers::pi - t});
    }
    return best;
  }
  return phase_delta(z, w, mode, {kDefaultMagnitudeFloor});
}

}  // namespace phasor
