#include "phasor/zrcp.hpp"

#include <string>

#include "phasor/error.hpp"

namespace phasor {

ZrcpParams zrcp_init(std::size_t d, bool bias_outside) {
  if (d < 2 || d % 2 != 0) {
    throw DimensionError("zrcp_init: dimension must be even and >= 2, got " + std::to_string(d));
  }
  const std::size_t half = d / 2;
  return {Matrix(half, half), DenseVector(half, 0.0), Matrix(half, half), DenseVector(half, 0.0),
          bias_outside};
}

namespace {

void check_shapes(const ZrcpParams& p, std::size_t input_dim) {
  const std::size_t half = p.half_dim();
  if (p.w_re.rows != half || p.w_re.cols != half || p.w_im.rows != half || p.w_im.cols != half ||
      p.b_im.size() != half) {
    throw DimensionError("zrcp: inconsistent parameter shapes");
  }
  if (input_dim != 2 * half) {
    throw DimensionError("zrcp: input dimension " + std::to_string(input_dim) +
                         " does not match projection dimension " + std::to_string(2 * half));
  }
}

DenseVector project_half(const Matrix& w, std::span<const double> b, std::span<const double> x,
                         bool bias_outside) {
  DenseVector out(x.begin(), x.end());
  if (bias_outside) {
    axpy(1.0, matvec(w, x), out);
    axpy(1.0, b, out);
  } else {
    axpy(1.0, matvec(w, add(x, b)), out);
  }
  return out;
}

// Backward of one half; accumulates into the parameter gradients and
// returns the gradient with respect to x.
DenseVector backward_half(const Matrix& w, std::span<const double> b, std::span<const double> x,
                          std::span<const double> g, bool bias_outside, Matrix& grad_w,
                          DenseVector& grad_b) {
  const DenseVector wt_g = matvec_transposed(w, g);
  if (bias_outside) {
    add_outer(grad_w, 1.0, g, x);
    grad_b.assign(g.begin(), g.end());
  } else {
    add_outer(grad_w, 1.0, g, add(x, b));
    grad_b = wt_g;
  }
  return add(g, wt_g);
}

}  // namespace

ComplexEmbedding zrcp_forward(const ZrcpParams& p, std::span<const double> h) {
  check_shapes(p, h.size());
  const ComplexEmbedding x = chunk_to_complex(h);
  return {project_half(p.w_re, p.b_re, x.re, p.bias_outside),
          project_half(p.w_im, p.b_im, x.im, p.bias_outside)};
}

ZrcpGradients zrcp_backward(const ZrcpParams& p, std::span<const double> h,
                            const ComplexEmbedding& upstream) {
  check_shapes(p, h.size());
  const std::size_t half = p.half_dim();
  if (upstream.re.size() != half || upstream.im.size() != half) {
    throw DimensionError("zrcp_backward: upstream gradient shape mismatch");
  }
  const ComplexEmbedding x = chunk_to_complex(h);
  ZrcpGradients g{Matrix(half, half), {}, Matrix(half, half), {}, {}};
  const DenseVector gx_re =
      backward_half(p.w_re, p.b_re, x.re, upstream.re, p.bias_outside, g.w_re, g.b_re);
  const DenseVector gx_im =
      backward_half(p.w_im, p.b_im, x.im, upstream.im, p.bias_outside, g.w_im, g.b_im);
  g.h = concat(gx_re, gx_im);
  return g;
}

}  // namespace phasor
