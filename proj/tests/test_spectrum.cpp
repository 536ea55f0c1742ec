#include <gtest/gtest.h>
#include <unistd.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <random>

#include "swfc/spectrum.hpp"
#include "test_support.hpp"

using namespace swfc;
using swfc_test::data;
using swfc_test::oracle;

namespace {

Spectrum three_modes() {
  return Spectrum({{-2.0, 1, Sector::Form}, {-0.5, 1, Sector::Spinor}, {1.0, 2, Sector::Spinor}}, {});
}

}  // namespace

TEST(Truncate, CountsRealDimensions) {
  auto w = truncate(three_modes(), -1.0, 2.0);
  EXPECT_EQ(w.total_dim, 6);
  EXPECT_EQ(w.m, 0);
  EXPECT_EQ(w.n, 1);
  EXPECT_EQ(w.coordinates().size(), 6u);
}

TEST(Truncate, EmptyWindow) {
  auto w = truncate(three_modes(), -0.4, 0.9);
  EXPECT_EQ(w.total_dim, 0);
  EXPECT_TRUE(w.modes.empty());
}

TEST(Truncate, BoundaryEigenvalueRejected) {
  try {
    truncate(three_modes(), -2.0, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EigenvalueOnBoundary);
  }
}

TEST(Truncate, S3LikeFileMatchesEnumerationOracle) {
  auto s = load_spectrum(data("spectra/s3_like.spec"));
  const auto& o = oracle()["s3_like"];
  auto w = truncate(s, o["window"][0].get<double>(), o["window"][1].get<double>());
  EXPECT_EQ(w.m, o["m"].get<int>());
  EXPECT_EQ(w.n, o["n"].get<int>());
  EXPECT_EQ(w.total_dim, o["total_dim"].get<int>());
  auto small = truncate(s, -2.2, 2.2);
  EXPECT_EQ(small.total_dim, o["small"]["total_dim"].get<int>());
}

TEST(Truncate, NestedWindowsDifferByEnumeratedModes) {
  auto s = load_spectrum(data("spectra/s3_like.spec"));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lo(-11.9, -0.1), hi(0.1, 11.9);
  for (int it = 0; it < 200; ++it) {
    double l1 = lo(rng), l2 = lo(rng), m1 = hi(rng), m2 = hi(rng);
    double lam = std::max(l1, l2), lamp = std::min(l1, l2), mu = std::min(m1, m2), mup = std::max(m1, m2);
    SpectralWindow a, b;
    try {
      a = truncate(s, lam, mu);
      b = truncate(s, lamp, mup);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::EigenvalueOnBoundary);
      continue;
    }
    for (auto idx : a.mode_indices)
      EXPECT_NE(std::find(b.mode_indices.begin(), b.mode_indices.end(), idx), b.mode_indices.end());
    int extra = 0;
    for (const auto& m : s.modes())
      if ((m.value > lamp && m.value <= lam) || (m.value > mu && m.value <= mup)) extra += m.real_dim();
    EXPECT_EQ(b.total_dim - a.total_dim, extra);
  }
}

TEST(MorseIndex, Examples) {
  Spectrum none({{1.0, 1, Sector::Form}}, {});
  auto w0 = truncate(none, -1.0, 2.0);
  EXPECT_EQ(reducible_morse_index(w0).m, 0);
  EXPECT_EQ(reducible_morse_index(w0).n, 0);

  Spectrum s({{-1.0, 2, Sector::Form}, {-0.2, 3, Sector::Spinor}}, {});
  auto mi = reducible_morse_index(truncate(s, -5.0, 1.0));
  EXPECT_EQ(mi.m, 2);
  EXPECT_EQ(mi.n, 3);
  EXPECT_EQ(mi.total(), 8);

  Spectrum z({{0.0, 1, Sector::Spinor}, {2.0, 1, Sector::Form}}, {});
  auto mz = reducible_morse_index(truncate(z, -1.0, 3.0));
  EXPECT_EQ(mz.n, 1);
}

TEST(ProjectionWeights, Examples) {
  auto beta = BumpSpec::polynomial();
  EXPECT_DOUBLE_EQ(projection_weight(0.0, -2.0, 2.0, beta), 1.0);
  EXPECT_DOUBLE_EQ(projection_weight(-2.0, -2.0, 2.0, beta), 0.0);
  double lam = -3.0, nu = lam + 0.5;
  double quad = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [](double t) { return 30.0 * t * t * (1 - t) * (1 - t); }, 0.0, 0.5, 20, 1e-15);
  EXPECT_NEAR(projection_weight(nu, lam, 3.0, beta), quad, 1e-8);
  EXPECT_NEAR(quad, 0.5, 1e-12);
}

TEST(ProjectionWeights, InBetweenAndStable) {
  Spectrum s({{-2.9, 1, Sector::Form}, {-1.5, 1, Sector::Spinor}, {0.5, 1, Sector::Form}, {2.7, 1, Sector::Spinor}},
             {});
  auto w = projection_weights(s, -3.0, 3.0);
  for (double v : w) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_DOUBLE_EQ(w[2], 1.0);
  EXPECT_LT(w[0], 1e-2);
  EXPECT_THROW(projection_weights(s, -0.5, 3.0), Error);
}

TEST(ProjectionWeights, BadBumpRejected) {
  BumpSpec b;
  b.density = [](double t) { return t > 0 && t < 1 ? 2.0 : 0.0; };
  try {
    b.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidBump);
  }
}

TEST(SpectrumFile, RoundTrip) {
  auto s = load_spectrum(data("spectra/pair.spec"));
  auto t = parse_spectrum(write_spectrum(s));
  ASSERT_EQ(s.size(), t.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s.modes()[i].value, t.modes()[i].value);
    EXPECT_EQ(s.modes()[i].multiplicity, t.modes()[i].multiplicity);
    EXPECT_EQ(s.modes()[i].sector, t.modes()[i].sector);
  }
  EXPECT_EQ(t.info().name, "pair");
}

TEST(SpectrumFile, Errors) {
  for (const char* text : {"mode 1 1 form\nmode -1 1 form\n", "mode 0 1 form\n", "mode 1 0 spinor\n",
                           "mode 1 1 vector\n", "colour red\n", "mode 1 1 form\nname late\n", "N 0\n",
                           "mode x 1 form\n"}) {
    try {
      parse_spectrum(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Parse) << text;
    }
  }
  try {
    load_spectrum(data("invalid/descending.spec"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
  }
}
