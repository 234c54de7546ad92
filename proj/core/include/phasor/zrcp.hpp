#pragma once

#include <span>

#include "phasor/complex_space.hpp"
#include "phasor/numerics.hpp"

namespace phasor {

// Zero-initialized residual complex projection:
//   re = x_re + W_re (x_re + b_re)
//   im = x_im + W_im (x_im + b_im)
// with (x_re, x_im) = chunk_to_complex(h). With bias_outside set the
// conventional form x + W x + b is used instead.
struct ZrcpParams {
  Matrix w_re;
  DenseVector b_re;
  Matrix w_im;
  DenseVector b_im;
  bool bias_outside = false;

  std::size_t half_dim() const { return b_re.size(); }
  bool operator==(const ZrcpParams&) const = default;
};

struct ZrcpGradients {
  Matrix w_re;
  DenseVector b_re;
  Matrix w_im;
  DenseVector b_im;
  DenseVector h;  // gradient with respect to the input embedding
};

ZrcpParams zrcp_init(std::size_t d, bool bias_outside = false);

ComplexEmbedding zrcp_forward(const ZrcpParams& p, std::span<const double> h);

ZrcpGradients zrcp_backward(const ZrcpParams& p, std::span<const double> h,
                            const ComplexEmbedding& upstream);

}  // namespace phasor
