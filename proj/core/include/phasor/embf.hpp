#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "phasor/masking.hpp"
#include "phasor/numerics.hpp"

namespace phasor {

// EMBF container, little-endian:
//   "EMBF" | u32 version (1) | u32 rows | u32 dim | rows*dim f32, row-major
inline constexpr std::uint32_t kEmbfVersion = 1;

struct EmbfTensor {
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  bool operator==(const EmbfTensor&) const = default;
};

void write_embf(const EmbfTensor& t, const std::filesystem::path& path);
// Reads any well-formed container; no constraint on dim.
EmbfTensor read_embf(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_embf(const EmbfTensor& t);
EmbfTensor decode_embf(const std::vector<std::uint8_t>& bytes);

// Narrowing conversions for parameter storage.
EmbfTensor to_embf(const Matrix& m);
Matrix from_embf(const EmbfTensor& t);

// One line of the `<path>.labels.jsonl` sidecar.
struct EmbeddingRowLabel {
  std::string aspect;
  Polarity polarity = Polarity::Positive;
  int text_len = 0;
  std::optional<double> intensity;

  bool operator==(const EmbeddingRowLabel&) const = default;
};

// Externally computed sentence embeddings with their labels.
struct EmbeddingTable {
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;
  std::vector<EmbeddingRowLabel> labels;

  // Row i widened to double (exact).
  DenseVector row(std::size_t i) const;

  bool operator==(const EmbeddingTable&) const = default;
};

std::filesystem::path labels_sidecar_path(const std::filesystem::path& embf_path);

// Requires an even dim and a sidecar with exactly `rows` lines (the sidecar
// may be absent only for an empty table).
EmbeddingTable load_external_embeddings(const std::filesystem::path& path);
void write_external_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

}  // namespace phasor
