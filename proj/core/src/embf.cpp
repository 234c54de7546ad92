#include "phasor/embf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "phasor/error.hpp"

namespace phasor {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', 'F'};
constexpr std::size_t kHeaderSize = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_embf(const EmbfTensor& t) {
  if (static_cast<std::size_t>(t.rows) * t.dim != t.data.size()) {
    throw DimensionError("encode_embf: payload size does not match rows x dim");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 4 * t.data.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kEmbfVersion);
  put_u32(out, t.rows);
  put_u32(out, t.dim);
  for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

EmbfTensor decode_embf(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize) throw FormatError("EMBF: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("EMBF: bad magic");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kEmbfVersion) {
    throw FormatError("EMBF: unsupported version " + std::to_string(version));
  }
  EmbfTensor t;
  t.rows = get_u32(bytes.data() + 8);
  t.dim = get_u32(bytes.data() + 12);
  const std::size_t count = static_cast<std::size_t>(t.rows) * t.dim;
  if (bytes.size() != kHeaderSize + 4 * count) {
    throw FormatError("EMBF: payload is " + std::to_string(bytes.size() - kHeaderSize) +
                      " bytes, expected " + std::to_string(4 * count));
  }
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.data[i] = std::bit_cast<float>(get_u32(bytes.data() + kHeaderSize + 4 * i));
  }
  return t;
}

void write_embf(const EmbfTensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_embf(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

EmbfTensor read_embf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_embf(bytes);
}

EmbfTensor to_embf(const Matrix& m) {
  EmbfTensor t{static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols), {}};
  t.data.reserve(m.data.size());
  for (double v : m.data) t.data.push_back(static_cast<float>(v));
  return t;
}

Matrix from_embf(const EmbfTensor& t) {
  Matrix m(t.rows, t.dim);
  for (std::size_t i = 0; i < t.data.size(); ++i) m.data[i] = static_cast<double>(t.data[i]);
  return m;
}

DenseVector EmbeddingTable::row(std::size_t i) const {
  if (i >= rows) throw ValidationError("EmbeddingTable: row " + std::to_string(i) + " out of range");
  DenseVector out(dim);
  for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<double>(data[i * dim + k]);
  return out;
}

std::filesystem::path labels_sidecar_path(const std::filesystem::path& embf_path) {
  return std::filesystem::path(embf_path.string() + ".labels.jsonl");
}

EmbeddingTable load_external_embeddings(const std::filesystem::path& path) {
  EmbfTensor t = read_embf(path);
  if (t.dim % 2 != 0) {
    throw FormatError("EMBF: embedding dim must be even, got " + std::to_string(t.dim));
  }
  EmbeddingTable table{t.rows, t.dim, std::move(t.data), {}};

  const auto sidecar = labels_sidecar_path(path);
  std::ifstream in(sidecar);
  if (!in) {
    if (table.rows == 0) return table;
    throw IoError("missing label sidecar " + sidecar.string());
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EmbeddingRowLabel l;
      l.aspect = j.at("aspect").get<std::string>();
      l.polarity = parse_polarity(j.at("polarity").get<std::string>());
      l.text_len = j.at("text_len").get<int>();
      if (j.contains("intensity") && !j["intensity"].is_null()) {
        l.intensity = j["intensity"].get<double>();
      }
      table.labels.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(sidecar.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (table.labels.size() != table.rows) {
    throw FormatError("label sidecar has " + std::to_string(table.labels.size()) +
                      " rows, EMBF has " + std::to_string(table.rows));
  }
  return table;
}

void write_external_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  if (table.dim % 2 != 0) throw DimensionError("EMBF: embedding dim must be even");
  if (table.labels.size() != table.rows) {
    throw DimensionError("write_external_embeddings: label count does not match rows");
  }
  write_embf({table.rows, table.dim, table.data}, path);
  std::ofstream out(labels_sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write label sidecar for " + path.string());
  for (const auto& l : table.labels) {
    nlohmann::json j{{"aspect", l.aspect},
                     {"polarity", std::string(to_string(l.polarity))},
                     {"text_len", l.text_len}};
    if (l.intensity) j["intensity"] = *l.intensity;
    out << j.dump() << '\n';
  }
}

}  // namespace phasor
