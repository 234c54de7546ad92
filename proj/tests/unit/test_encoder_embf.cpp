#include <algorithm>
#include <fstream>

#include "phasor/embf.hpp"
#include "phasor/encoder.hpp"
#include "phasor/error.hpp"
#include "test_support.hpp"

namespace phasor {
namespace {

ToyEncoderParams fixture_encoder(const nlohmann::json& fx) {
  ToyEncoderParams p;
  const auto vocab = fx["vocab"].get<std::size_t>();
  const auto d_embed = fx["d_embed"].get<std::size_t>();
  const auto d_out = fx["d_out"].get<std::size_t>();
  p.token_table = Matrix(vocab, d_embed);
  p.token_table.data = fx["table"].get<std::vector<double>>();
  p.head_w = Matrix(d_out, d_embed);
  p.head_w.data = fx["head_w"].get<std::vector<double>>();
  p.head_b = fx["head_b"].get<DenseVector>();
  return p;
}

TEST(EncoderInit, DeterministicPerSeed) {
  RngStream a(17), b(17), a2(17), c(18);
  EXPECT_EQ(encoder_init(10, 4, 6, a), encoder_init(10, 4, 6, b));
  EXPECT_NE(encoder_init(10, 4, 6, a2), encoder_init(10, 4, 6, c));
}

TEST(EncoderInit, ZeroBiasAndDefaultScale) {
  RngStream rng(1);
  const ToyEncoderParams p = encoder_init(400, 32, 6, rng);
  EXPECT_EQ(p.head_b, DenseVector(6, 0.0));
  EXPECT_EQ(kDefaultEncoderInitStd, 0.02);
  EXPECT_NEAR(summarize(p.token_table.data).std, 0.02, 0.001);
  EXPECT_THROW(encoder_init(10, 4, 5, rng), DimensionError);
}

TEST(Encode, SingleTokenIsLinearHead) {
  RngStream rng(2);
  const ToyEncoderParams p = encoder_init(5, 3, 4, rng, 0.5);
  const DenseVector h = encode(p, std::vector<int>{2});
  const DenseVector want = add(matvec(p.head_w, p.token_table.row(2)), p.head_b);
  EXPECT_EQ(h, want);
}

TEST(Encode, BagOfTokensPooling) {
  RngStream rng(3);
  const ToyEncoderParams p = encoder_init(6, 3, 4, rng, 0.5);
  testing::expect_close(encode(p, std::vector<int>{4, 4}), encode(p, std::vector<int>{4}), 1e-15);
  testing::expect_close(encode(p, std::vector<int>{1, 3, 5}), encode(p, std::vector<int>{5, 1, 3}), 1e-15);
  EXPECT_THROW(encode(p, std::vector<int>{}), ValidationError);
  EXPECT_THROW(encode(p, std::vector<int>{6}), ValidationError);
}

TEST(EncodeBackward, MatchesOracle) {
  const auto& fx = testing::oracle_fixtures()["encoder"];
  const ToyEncoderParams p = fixture_encoder(fx);
  const auto toks = fx["tokens"].get<std::vector<int>>();
  const auto g = fx["upstream"].get<DenseVector>();
  testing::expect_close(encode(p, toks), fx["h"].get<DenseVector>(), 1e-14);
  const EncoderGradients eg = encode_backward(p, toks, g);
  testing::expect_close(eg.head_w.data, fx["grad_head_w"].get<DenseVector>(), 1e-13);
  EXPECT_EQ(eg.head_b, g);
  ASSERT_EQ(eg.rows.size(), fx["grad_rows"].size());
  for (const auto& [tok, row] : eg.rows) {
    testing::expect_close(row, fx["grad_rows"][std::to_string(tok)].get<DenseVector>(), 1e-13);
  }
}

TEST(EncodeBackward, OnlyPresentRowsAndFiniteDifferenceAgreement) {
  RngStream rng(4);
  ToyEncoderParams p = encoder_init(8, 3, 4, rng, 0.5);
  const std::vector<int> toks{0, 5, 5, 2};
  const DenseVector g = gaussian_sample(rng, 4, 0.0, 1.0);
  const EncoderGradients eg = encode_backward(p, toks, g);
  std::vector<int> keys;
  for (const auto& [t, _] : eg.rows) keys.push_back(t);
  EXPECT_EQ(keys, (std::vector<int>{0, 2, 5}));

  auto f = [&](std::span<const double> row) {
    ToyEncoderParams q = p;
    std::copy(row.begin(), row.end(), q.token_table.row(5).begin());
    return dot(g, encode(q, toks));
  };
  const auto r5 = p.token_table.row(5);
  const DenseVector fd = finite_difference_gradient(f, DenseVector(r5.begin(), r5.end()));
  EXPECT_LT(relative_error(eg.rows.at(5), fd), 1e-5);
}

// --- EMBF ------------------------------------------------------------------------------

TEST(Embf, HeaderLayoutIsLittleEndian) {
  const EmbfTensor t{2, 2, {1.0f, -2.0f, 0.5f, 3.0f}};
  const auto bytes = encode_embf(t);
  ASSERT_EQ(bytes.size(), 16u + 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EMBF");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[8], 2);  // rows
  EXPECT_EQ(bytes[12], 2);  // dim
  EXPECT_EQ(bytes[16 + 3], 0x3f);  // 1.0f = 0x3f800000
  EXPECT_EQ(decode_embf(bytes), t);
}

TEST(Embf, FileRoundTripIsBitExact) {
  testing::TempDir dir("embf");
  RngStream rng(5);
  EmbfTensor t{3, 4, {}};
  for (double v : gaussian_sample(rng, 12, 0.0, 1.0)) t.data.push_back(static_cast<float>(v));
  write_embf(t, dir.path() / "t.embf");
  EXPECT_EQ(read_embf(dir.path() / "t.embf"), t);
  EXPECT_EQ(from_embf(to_embf(from_embf(t))), from_embf(t));
}

TEST(Embf, MalformedContainersRejected) {
  const auto good = encode_embf(EmbfTensor{1, 2, {1.0f, 2.0f}});
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_embf(bad_magic), FormatError);
  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_embf(bad_version), FormatError);
  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(decode_embf(truncated), FormatError);
  EXPECT_THROW(decode_embf(std::vector<std::uint8_t>(5, 0)), FormatError);
  EXPECT_THROW(read_embf("/nonexistent/x.embf"), IoError);
}

TEST(ExternalEmbeddings, RoundTripWithSidecar) {
  testing::TempDir dir("ext");
  EmbeddingTable t;
  t.rows = 2;
  t.dim = 4;
  t.data = {0.1f, 0.2f, 0.3f, 0.4f, -1.0f, 2.0f, -3.0f, 4.0f};
  t.labels = {{"food", Polarity::Positive, 12, 3.0}, {"service", Polarity::Neutral, 7, std::nullopt}};
  const auto path = dir.path() / "e.embf";
  write_external_embeddings(t, path);
  EXPECT_TRUE(std::filesystem::exists(labels_sidecar_path(path)));
  EXPECT_EQ(load_external_embeddings(path), t);
  EXPECT_EQ(t.row(1), (DenseVector{-1.0, 2.0, -3.0, 4.0}));
}

TEST(ExternalEmbeddings, OddDimensionRejected) {
  testing::TempDir dir("odd");
  write_embf(EmbfTensor{1, 7, std::vector<float>(7, 1.0f)}, dir.path() / "o.embf");
  std::ofstream(dir.path() / "o.embf.labels.jsonl") << R"({"aspect":"a","polarity":"pos","text_len":1})" << '\n';
  EXPECT_THROW(load_external_embeddings(dir.path() / "o.embf"), ValidationError);
}

TEST(ExternalEmbeddings, EmptyTableIsValid) {
  testing::TempDir dir("empty");
  write_embf(EmbfTensor{0, 4, {}}, dir.path() / "z.embf");
  const EmbeddingTable t = load_external_embeddings(dir.path() / "z.embf");
  EXPECT_EQ(t.rows, 0u);
  EXPECT_TRUE(t.labels.empty());
}

TEST(ExternalEmbeddings, SidecarRowCountMustMatch) {
  testing::TempDir dir("mismatch");
  write_embf(EmbfTensor{2, 2, {1, 2, 3, 4}}, dir.path() / "m.embf");
  std::ofstream(dir.path() / "m.embf.labels.jsonl") << R"({"aspect":"a","polarity":"pos","text_len":1})" << '\n';
  EXPECT_THROW(load_external_embeddings(dir.path() / "m.embf"), FormatError);
}

}  // namespace
}  // namespace phasor
