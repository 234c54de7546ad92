#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace phasor {

enum class Polarity : std::uint8_t { Positive = 0, Negative = 1, Neutral = 2 };
inline constexpr std::size_t kNumPolarities = 3;

std::string_view to_string(Polarity p);   // "pos" | "neg" | "neu"
Polarity parse_polarity(std::string_view s);

// The unit of the anti-collision mask: an (aspect, polarity) pair.
struct SemanticLabel {
  int aspect = 0;
  Polarity polarity = Polarity::Positive;

  bool operator==(const SemanticLabel&) const = default;
};

// Symmetric 0/1 matrix, M(i, j) = 1 iff items i and j share a semantic label.
class MaskMatrix {
 public:
  MaskMatrix() = default;
  explicit MaskMatrix(std::size_t n) : n_(n), entries_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { entries_[i * n_ + j] = v ? 1 : 0; }

  bool operator==(const MaskMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> entries_;
};

MaskMatrix build_anticollision_mask(std::span<const SemanticLabel> labels);

// Mask with only the self pairs set; what the loss sees when masking is
// disabled.
MaskMatrix identity_mask(std::size_t n);

enum class TripletRole : std::uint8_t { Query, Positive, Negative };

struct RoleAnnotation {
  std::size_t triplet = 0;
  TripletRole role = TripletRole::Query;
};

struct PairIndex {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;

  bool operator==(const PairIndex&) const = default;
};

// One PairIndex per triplet, in order of first appearance of the triplet id.
// Every triplet must have exactly one query, exactly one positive with the
// query's label, and at least one negative of the same aspect and a
// different polarity; violations raise DataIntegrityError.
std::vector<PairIndex> build_pair_index(std::span<const SemanticLabel> labels,
                                        std::span<const RoleAnnotation> roles);

}  // namespace phasor
