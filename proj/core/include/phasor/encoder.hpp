#pragma once

#include <map>
#include <span>
#include <vector>

#include "phasor/numerics.hpp"

namespace phasor {

using TokenSequence = std::vector<int>;
inline constexpr std::size_t kDefaultMaxSequenceLength = 192;

// Bag-of-tokens toy encoder: h = head_w * mean(token_table[toks]) + head_b.
// Stands in for a pre-trained sentence encoder.
struct ToyEncoderParams {
  Matrix token_table;  // vocab_size x d_embed
  Matrix head_w;       // d_out x d_embed
  DenseVector head_b;  // d_out

  std::size_t vocab_size() const { return token_table.rows; }
  std::size_t d_embed() const { return token_table.cols; }
  std::size_t d_out() const { return head_b.size(); }
  bool operator==(const ToyEncoderParams&) const = default;
};

struct EncoderGradients {
  Matrix head_w;
  DenseVector head_b;
  std::map<int, DenseVector> rows;  // only the rows of tokens present
};

inline constexpr double kDefaultEncoderInitStd = 0.02;

ToyEncoderParams encoder_init(std::size_t vocab_size, std::size_t d_embed, std::size_t d_out,
                              RngStream& rng, double init_std = kDefaultEncoderInitStd);

DenseVector encode(const ToyEncoderParams& p, std::span<const int> toks);

EncoderGradients encode_backward(const ToyEncoderParams& p, std::span<const int> toks,
                                 std::span<const double> grad_h);

}  // namespace phasor
