#include <cmath>
#include <numbers>

#include "phasor/complex_space.hpp"
#include "phasor/error.hpp"
#include "test_support.hpp"

namespace phasor {
namespace {

ComplexEmbedding c1(double re, double im) { return {{re}, {im}}; }

TEST(ChunkToComplex, SplitsHalves) {
  const ComplexEmbedding z = chunk_to_complex(DenseVector{1, 2, 3, 4});
  EXPECT_EQ(z.re, (DenseVector{1, 2}));
  EXPECT_EQ(z.im, (DenseVector{3, 4}));
  EXPECT_EQ(chunk_to_complex(DenseVector{0, 0}), c1(0, 0));
}

TEST(ChunkToComplex, RoundTripIsExact) {
  RngStream rng(1);
  const DenseVector h = gaussian_sample(rng, 10, 0.0, 1.0);
  EXPECT_EQ(to_real(chunk_to_complex(h)), h);
}

TEST(ChunkToComplex, OddDimensionRejected) {
  EXPECT_THROW(chunk_to_complex(DenseVector{1, 2, 3}), DimensionError);
  EXPECT_THROW(chunk_to_complex(DenseVector{}), DimensionError);
}

TEST(HardChunk, IdenticalToChunkToComplex) {
  RngStream rng(2);
  for (int i = 0; i < 20; ++i) {
    const DenseVector h = gaussian_sample(rng, 8, 0.0, 1.0);
    EXPECT_EQ(hard_chunk_projection(h), chunk_to_complex(h));
  }
  EXPECT_EQ(hard_chunk_projection(DenseVector{1, 0}), c1(1, 0));
}

TEST(ComplexDivide, SpecCases) {
  EXPECT_EQ(complex_divide(c1(1, 1), c1(1, 0)), c1(1, 1));
  EXPECT_EQ(complex_divide(c1(1, 0), c1(0, 1)), c1(0, -1));
  const ComplexEmbedding z{{0.3, -2.0}, {1.7, 0.5}};
  const ComplexEmbedding q = complex_divide(z, z);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(q.re[k], 1.0, 1e-15);
    EXPECT_NEAR(q.im[k], 0.0, 1e-15);
  }
}

TEST(ComplexDivide, SingularityErrorsUnlessFloored) {
  const ComplexEmbedding z{{1.0, 1.0}, {1.0, 1.0}};
  const ComplexEmbedding w{{1.0, 0.0}, {0.0, 0.0}};
  try {
    complex_divide(z, w);
    FAIL() << "expected DivisionSingularityError";
  } catch (const DivisionSingularityError& e) {
    EXPECT_EQ(e.coordinate(), 1u);
  }
  const ComplexEmbedding q = complex_divide(z, w, {kDefaultMagnitudeFloor});
  EXPECT_TRUE(all_finite(q.re));
}

TEST(ComplexDivide, ShapeMismatchRejected) {
  EXPECT_THROW(complex_divide(ComplexEmbedding{{1, 2}, {1, 2}}, c1(1, 0)), DimensionError);
}

TEST(Amplitude, NormCases) {
  EXPECT_DOUBLE_EQ(amplitude(c1(3, 4)), 5.0);
  EXPECT_DOUBLE_EQ(amplitude(ComplexEmbedding{{0, 0}, {0, 0}}), 0.0);
  const ComplexEmbedding z{{0.3, -1.2}, {2.0, 0.4}};
  EXPECT_NEAR(amplitude(scaled(z, 2.5)), 2.5 * amplitude(z), 1e-14);
}

TEST(PhaseDelta, ExactPhaseCases) {
  EXPECT_NEAR(phase_delta(c1(1, 1), c1(1, 0), AngleMode::ExactPhase), std::numbers::pi / 4, 1e-15);
  const ComplexEmbedding z{{0.3, -1.2}, {2.0, 0.4}};
  EXPECT_DOUBLE_EQ(phase_delta(z, z, AngleMode::ExactPhase), 0.0);
  EXPECT_DOUBLE_EQ(phase_delta(c1(1, 0), c1(-1, 0), AngleMode::ExactPhase), std::numbers::pi);
}

TEST(PhaseDelta, RangeAndScaleInvariance) {
  RngStream rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto z = chunk_to_complex(gaussian_sample(rng, 8, 0.0, 1.0));
    const auto w = chunk_to_complex(gaussian_sample(rng, 8, 0.0, 1.0));
    const double d = phase_delta(z, w, AngleMode::ExactPhase);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, std::numbers::pi);
    for (AngleMode mode : {AngleMode::ExactPhase, AngleMode::SurrogateSum}) {
      const double base = phase_delta(z, w, mode);
      EXPECT_NEAR(phase_delta(scaled(z, 3.7), scaled(w, 0.1), mode), base,
                  1e-12 * std::max(1.0, base));
    }
  }
}

TEST(PhaseDelta, GradientMatchesFiniteDifferences) {
  RngStream rng(5);
  for (AngleMode mode : {AngleMode::ExactPhase, AngleMode::SurrogateSum}) {
    for (int i = 0; i < 10; ++i) {
      const DenseVector zw = gaussian_sample(rng, 12, 0.0, 1.0);
      const auto z = chunk_to_complex(std::span(zw).subspan(0, 6));
      const auto w = chunk_to_complex(std::span(zw).subspan(6, 6));
      if (phase_branch_distance(z, w, mode) < 1e-3) continue;
      const PhaseDeltaGrad g = phase_delta_with_grad(z, w, mode);
      EXPECT_NEAR(g.value, phase_delta(z, w, mode), 1e-14);
      auto f = [&](std::span<const double> x) {
        return phase_delta(chunk_to_complex(x.subspan(0, 6)), chunk_to_complex(x.subspan(6, 6)), mode);
      };
      const DenseVector fd = finite_difference_gradient(f, zw);
      const DenseVector analytic = concat(to_real(g.d_z), to_real(g.d_w));
      EXPECT_LT(relative_error(analytic, fd), 1e-6);
    }
  }
}

TEST(AngleModeNames, ParseRoundTrip) {
  EXPECT_EQ(parse_angle_mode("exact"), AngleMode::ExactPhase);
  EXPECT_EQ(parse_angle_mode(to_string(AngleMode::SurrogateSum)), AngleMode::SurrogateSum);
  EXPECT_THROW(parse_angle_mode("phase"), ValidationError);
}

}  // namespace
}  // namespace phasor
