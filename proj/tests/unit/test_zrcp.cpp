#include "phasor/error.hpp"
#include "phasor/zrcp.hpp"
#include "test_support.hpp"

namespace phasor {
namespace {

TEST(ZrcpInit, ZeroTensorsWithHalfDimShapes) {
  const ZrcpParams p = zrcp_init(4);
  EXPECT_EQ(p.w_re.rows, 2u);
  EXPECT_EQ(p.w_re.cols, 2u);
  EXPECT_EQ(p.w_im.rows, 2u);
  EXPECT_EQ(p.b_re, DenseVector(2, 0.0));
  EXPECT_EQ(p.b_im, DenseVector(2, 0.0));
  EXPECT_EQ(p.w_re.data, std::vector<double>(4, 0.0));
  EXPECT_EQ(p.w_im.data, std::vector<double>(4, 0.0));

  const ZrcpParams s = zrcp_init(2);
  EXPECT_EQ(s.w_re.data, std::vector<double>{0.0});
  EXPECT_EQ(s.b_im, DenseVector{0.0});
  EXPECT_THROW(zrcp_init(3), DimensionError);
}

TEST(ZrcpForward, IdentityAtZeroInit) {
  EXPECT_EQ(zrcp_forward(zrcp_init(4), DenseVector{1, 2, 3, 4}),
            (ComplexEmbedding{{1, 2}, {3, 4}}));
  RngStream rng(8);
  for (int i = 0; i < 100; ++i) {
    const DenseVector h = gaussian_sample(rng, 16, 0.0, 3.0);
    EXPECT_EQ(zrcp_forward(zrcp_init(16), h), chunk_to_complex(h));
  }
}

TEST(ZrcpForward, ResidualDoublesRealChunkWithIdentityWeight) {
  ZrcpParams p = zrcp_init(4);
  p.w_re = Matrix::identity(2);
  EXPECT_EQ(zrcp_forward(p, DenseVector{1, 2, 3, 4}), (ComplexEmbedding{{2, 4}, {3, 4}}));
}

TEST(ZrcpForward, BiasInsideIsAnnihilatedByZeroWeight) {
  ZrcpParams p = zrcp_init(4);
  p.b_re = {5.0, -7.0};
  EXPECT_EQ(zrcp_forward(p, DenseVector{1, 2, 3, 4}), chunk_to_complex(DenseVector{1, 2, 3, 4}));
  p.bias_outside = true;
  EXPECT_EQ(zrcp_forward(p, DenseVector{1, 2, 3, 4}), (ComplexEmbedding{{6, -5}, {3, 4}}));
}

TEST(ZrcpForward, WrongInputDimensionRejected) {
  EXPECT_THROW(zrcp_forward(zrcp_init(4), DenseVector{1, 2}), DimensionError);
}

TEST(ZrcpBackward, IdentityJacobianAtZeroInit) {
  const ComplexEmbedding g{{0.5, -1.0}, {2.0, 0.25}};
  const ZrcpGradients gr = zrcp_backward(zrcp_init(4), DenseVector{1, 2, 3, 4}, g);
  EXPECT_EQ(gr.h, (DenseVector{0.5, -1.0, 2.0, 0.25}));
  EXPECT_EQ(gr.b_re, DenseVector(2, 0.0));
  EXPECT_EQ(gr.b_im, DenseVector(2, 0.0));
}

ZrcpParams fixture_params(const nlohmann::json& fx, bool bias_outside) {
  const std::size_t half = fx["half"].get<std::size_t>();
  ZrcpParams p = zrcp_init(2 * half, bias_outside);
  p.w_re.data = fx["W_re"].get<std::vector<double>>();
  p.b_re = fx["b_re"].get<DenseVector>();
  p.w_im.data = fx["W_im"].get<std::vector<double>>();
  p.b_im = fx["b_im"].get<DenseVector>();
  return p;
}

TEST(ZrcpBackward, MatchesOracleFixture) {
  const auto& fx = testing::oracle_fixtures()["zrcp"];
  const auto h = fx["h"].get<DenseVector>();
  const auto g = chunk_to_complex(fx["upstream"].get<DenseVector>());
  for (const auto& c : fx["cases"]) {
    const ZrcpParams p = fixture_params(fx, c["bias_outside"].get<bool>());
    const ComplexEmbedding z = zrcp_forward(p, h);
    testing::expect_close(z.re, c["re"].get<DenseVector>(), 1e-14);
    testing::expect_close(z.im, c["im"].get<DenseVector>(), 1e-14);
    const ZrcpGradients gr = zrcp_backward(p, h, g);
    testing::expect_close(gr.w_re.data, c["grad_W_re"].get<DenseVector>(), 1e-12);
    testing::expect_close(gr.b_re, c["grad_b_re"].get<DenseVector>(), 1e-12);
    testing::expect_close(gr.w_im.data, c["grad_W_im"].get<DenseVector>(), 1e-12);
    testing::expect_close(gr.b_im, c["grad_b_im"].get<DenseVector>(), 1e-12);
    testing::expect_close(gr.h, c["grad_h"].get<DenseVector>(), 1e-12);
  }
}

TEST(ZrcpBackward, RandomParamsMatchFiniteDifferences) {
  RngStream rng(13);
  const std::size_t half = 3;
  ZrcpParams p = zrcp_init(2 * half);
  p.w_re.data = gaussian_sample(rng, half * half, 0.0, 0.3);
  p.w_im.data = gaussian_sample(rng, half * half, 0.0, 0.3);
  p.b_re = gaussian_sample(rng, half, 0.0, 0.3);
  p.b_im = gaussian_sample(rng, half, 0.0, 0.3);
  const DenseVector h = gaussian_sample(rng, 2 * half, 0.0, 1.0);
  const DenseVector g = gaussian_sample(rng, 2 * half, 0.0, 1.0);
  auto f = [&](std::span<const double> b) {
    ZrcpParams q = p;
    q.b_re.assign(b.begin(), b.end());
    return dot(g, to_real(zrcp_forward(q, h)));
  };
  const DenseVector fd = finite_difference_gradient(f, p.b_re);
  EXPECT_LT(relative_error(zrcp_backward(p, h, chunk_to_complex(g)).b_re, fd), 1e-5);
}

}  // namespace
}  // namespace phasor
