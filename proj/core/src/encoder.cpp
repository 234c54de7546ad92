#include "phasor/encoder.hpp"

#include <string>

#include "phasor/error.hpp"

namespace phasor {

ToyEncoderParams encoder_init(std::size_t vocab_size, std::size_t d_embed, std::size_t d_out,
                              RngStream& rng, double init_std) {
  if (d_out < 2 || d_out % 2 != 0) {
    throw DimensionError("encoder_init: d_out must be even and >= 2, got " + std::to_string(d_out));
  }
  if (vocab_size == 0 || d_embed == 0) throw DimensionError("encoder_init: empty vocabulary or embedding");
  ToyEncoderParams p{Matrix(vocab_size, d_embed), Matrix(d_out, d_embed), DenseVector(d_out, 0.0)};
  p.token_table.data = gaussian_sample(rng, vocab_size * d_embed, 0.0, init_std);
  p.head_w.data = gaussian_sample(rng, d_out * d_embed, 0.0, init_std);
  return p;
}

namespace {

DenseVector mean_pool(const ToyEncoderParams& p, std::span<const int> toks) {
  if (toks.empty()) throw ValidationError("encode: empty token sequence");
  DenseVector m(p.d_embed(), 0.0);
  for (int t : toks) {
    if (t < 0 || static_cast<std::size_t>(t) >= p.vocab_size()) {
      throw ValidationError("encode: token id " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(p.vocab_size()));
    }
    axpy(1.0, p.token_table.row(static_cast<std::size_t>(t)), m);
  }
  for (double& v : m) v /= static_cast<double>(toks.size());
  return m;
}

}  // namespace

DenseVector encode(const ToyEncoderParams& p, std::span<const int> toks) {
  DenseVector h = matvec(p.head_w, mean_pool(p, toks));
  axpy(1.0, p.head_b, h);
  return h;
}

EncoderGradients encode_backward(const ToyEncoderParams& p, std::span<const int> toks,
                                 std::span<const double> grad_h) {
  if (grad_h.size() != p.d_out()) throw DimensionError("encode_backward: gradient shape mismatch");
  const DenseVector m = mean_pool(p, toks);
  EncoderGradients g{Matrix(p.d_out(), p.d_embed()), DenseVector(grad_h.begin(), grad_h.end()), {}};
  add_outer(g.head_w, 1.0, grad_h, m);
  const DenseVector grad_m = matvec_transposed(p.head_w, grad_h);
  const double inv_len = 1.0 / static_cast<double>(toks.size());
  for (int t : toks) {
    auto [it, inserted] = g.rows.try_emplace(t, DenseVector(p.d_embed(), 0.0));
    axpy(inv_len, grad_m, it->second);
  }
  return g;
}

}  // namespace phasor
