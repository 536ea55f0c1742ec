#include <gtest/gtest.h>
#include <unistd.h>

#include <cmath>
#include <random>

#include "swfc/swflow.hpp"
#include "test_support.hpp"

using namespace swfc;
using swfc_test::data;
using swfc_test::oracle;

namespace {

TruncatedModel seeded_model(unsigned long long seed, double scale = 1.0) {
  Spectrum s({{-1.7, 1, Sector::Form}, {-1.3, 1, Sector::Spinor}, {1.2, 2, Sector::Spinor}, {1.9, 1, Sector::Form}},
             {"seeded", 1, {}, {}});
  auto w = truncate(s, -3.0, 3.0);
  return TruncatedModel(s, -3.0, 3.0, 1.0, random_equivariant_tensor(w.coordinates(), seed, scale));
}

// Three nested loops over the full symmetric array.
double naive_csd(const TruncatedModel& m, const std::vector<double>& x) {
  const int d = static_cast<int>(m.dim());
  double q = 0, c = 0;
  for (int i = 0; i < d; ++i) q += m.l_diag()[i] * x[i] * x[i];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) c += m.gamma().get(i, j, k) * x[i] * x[j] * x[k];
  return 0.5 * q + c / 3.0;
}

std::vector<double> random_point(std::mt19937_64& rng, std::size_t d, double radius) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ur;
  std::vector<double> x(d);
  double n = 0;
  for (auto& v : x) {
    v = nd(rng);
    n += v * v;
  }
  double r = radius * std::pow(ur(rng), 1.0 / d) / std::sqrt(n);
  for (auto& v : x) v *= r;
  return x;
}

}  // namespace

TEST(Csd, ZeroAndQuadratic) {
  auto m = seeded_model(42);
  std::vector<double> zero(m.dim(), 0.0);
  EXPECT_EQ(m.csd(zero), 0.0);
  Spectrum s({{0.7, 1, Sector::Form}}, {});
  TruncatedModel lin(s, -1.0, 1.0, 1.0, CouplingTensor(1));
  std::vector<double> e{0.3};
  EXPECT_DOUBLE_EQ(lin.csd(e), 0.5 * 0.7 * 0.09);
}

TEST(Csd, MatchesNaiveTripleLoop) {
  auto m = seeded_model(42);
  std::mt19937_64 rng(9);
  for (int it = 0; it < 50; ++it) {
    auto x = random_point(rng, m.dim(), 1.5);
    double a = m.csd(x), b = naive_csd(m, x);
    EXPECT_NEAR(a, b, 1e-12 * (1 + std::abs(b)));
  }
}

TEST(VectorField, ZeroAtOriginAndOutsideSupport) {
  auto m = seeded_model(42);
  std::vector<double> x(m.dim(), 0.0);
  for (double v : vector_field(m, x)) EXPECT_EQ(v, 0.0);
  x[0] = 4.0 * m.R() + 0.01;
  for (double v : vector_field(m, x)) EXPECT_EQ(v, 0.0);
}

TEST(VectorField, FiniteDifferenceGradientInsideBall) {
  auto m = seeded_model(42, 0.3);
  // Inside ball(R) the cutoff is 1; compare -field with the unweighted gradient where weights are 1.
  std::mt19937_64 rng(42);
  std::vector<double> xp(m.dim());
  for (int it = 0; it < 20; ++it) {
    auto x = random_point(rng, m.dim(), m.R());
    auto f = vector_field(m, x);
    std::vector<double> g(m.dim());
    m.csd_gradient(x, g);
    double gmax = 0, err = 0;
    for (std::size_t i = 0; i < m.dim(); ++i) {
      xp = x;
      xp[i] += 1e-5;
      double a = m.csd(xp);
      xp[i] -= 2e-5;
      double b = m.csd(xp);
      double fd = (a - b) / 2e-5;
      gmax = std::max(gmax, std::abs(fd));
      err = std::max(err, std::abs(fd - g[i]));
      // Weighted field agrees with the gradient on coordinates of full weight.
      if (m.weights()[i] == 1.0) {
        EXPECT_NEAR(-f[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
    EXPECT_LE(err, 1e-6 * std::max(gmax, 1e-8));
  }
}

TEST(VectorField, ThousandPointChecksOnBundledModels) {
  for (const char* name : {"models/pair.model", "models/poincare_like.model", "models/decomposition.model",
                           "models/s3_like.model"}) {
    auto m = load_model(data(name));
    auto r = field_checks(m, 1000, 42);
    EXPECT_TRUE(r.ok()) << name << " gradient " << r.gradient_error << " equivariance " << r.equivariance_error;
  }
}

TEST(VectorField, JacobianMatchesFiniteDifferences) {
  auto m = seeded_model(7, 0.5);
  std::mt19937_64 rng(1);
  const std::size_t d = m.dim();
  std::vector<double> J(d * d), yp(d), ym(d);
  for (double radius : {1.0, 3.5}) {
    auto x = random_point(rng, d, radius);
    m.jacobian(x, J);
    auto xp = x;
    for (std::size_t j = 0; j < d; ++j) {
      xp = x;
      xp[j] += 1e-6;
      m.eval(xp, yp);
      xp[j] -= 2e-6;
      m.eval(xp, ym);
      for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(J[i * d + j], (yp[i] - ym[i]) / 2e-6, 1e-5);
    }
  }
}

TEST(Equivariance, RandomTensorIsInvariantAndFieldCommutes) {
  auto m = seeded_model(42);
  EXPECT_TRUE(is_equivariant(m));
  auto r = field_checks(m, 200, 5);
  EXPECT_LE(r.equivariance_error, 1e-12);
  CouplingTensor bad(m.dim());
  bad.set(1, 1, 1, 1.0);  // cubic in a spinor real part
  Spectrum s = m.spectrum();
  TruncatedModel broken(s, -3.0, 3.0, 1.0, bad);
  EXPECT_FALSE(is_equivariant(broken));
}

TEST(Integrate, LinearDecay) {
  Spectrum s({{0.8, 1, Sector::Form}}, {});
  TruncatedModel m(s, -1.0, 1.0, 1.0, CouplingTensor(1));
  std::vector<double> x0{0.5};
  auto tr = integrate(m, x0, 1.0, 1e-10);
  EXPECT_NEAR(tr.states.back()[0], std::exp(-0.8) * 0.5, 1e-8);
  std::vector<double> z{0.0};
  auto t0 = integrate(m, z, 3.0, 1e-8);
  for (const auto& st : t0.states) EXPECT_EQ(st[0], 0.0);
}

TEST(Integrate, CubicModelConvergesToBisectionRoot) {
  // One form mode with eigenvalue -1 and Gamma_000 = g: x' = x - g x^2.
  const double g = 0.8;
  Spectrum s({{-1.0, 1, Sector::Form}}, {});
  CouplingTensor t(1);
  t.set(0, 0, 0, g);
  TruncatedModel m(s, -2.0, 2.0, 1.0, t);
  auto f = [&](double x) { return x - g * x * x; };
  double a = 0.5, b = 3.0;
  for (int i = 0; i < 200; ++i) {
    double c = 0.5 * (a + b);
    (f(a) * f(c) <= 0 ? b : a) = c;
  }
  std::vector<double> x0{0.1};
  auto tr = integrate(m, x0, 30.0, 1e-10);
  EXPECT_NEAR(tr.states.back()[0], 0.5 * (a + b), 1e-7);
}

TEST(Confinement, LinearGappedModelIsConfined) {
  auto m = load_model(data("models/gapped.model"));
  auto r = confinement_check(m, 200, 20.0);
  EXPECT_TRUE(r.ok()) << r.violations.size();
}

TEST(Confinement, SmallCouplingPoincareModel) {
  const auto& o = oracle()["poincare_like"];
  ASSERT_TRUE(o["contraction_holds"].get<bool>());
  auto m = load_model(data("models/poincare_like.model"));
  EXPECT_LE(m.alpha(), o["alpha_crude"].get<double>());
  EXPECT_TRUE(m.gapped_shortcut_applies());
  auto r = confinement_check(m, 200, 20.0);
  EXPECT_TRUE(r.ok()) << r.violations.size();
}

TEST(Confinement, StrongCouplingFails) {
  // Decoupled cubics x' = x - g x^2 and y' = -y - g y^2: orbits from (0, 1.5) to (1.5, 0) stay inside the annulus.
  const double g = 2.0 / 3.0;
  Spectrum s({{-1.0, 1, Sector::Form}, {1.0, 1, Sector::Form}}, {});
  CouplingTensor t(2);
  t.set(0, 0, 0, g);
  t.set(1, 1, 1, -g);
  TruncatedModel m(s, -2.5, 2.5, 1.0, t);
  EXPECT_FALSE(m.gapped_shortcut_applies());
  auto r = confinement_check(m, 400, 20.0);
  EXPECT_FALSE(r.ok());
  for (const auto& v : r.violations) {
    EXPECT_GT(v.start[0], 0.0);
    EXPECT_GT(v.start[1], 0.0);
  }
}

TEST(ModelFile, ParseErrors) {
  for (const char* text : {"", "swfc-model 2\n", "swfc-model 1\nname x\n", "swfc-model 1\nspectrum a\nlambda 1\nmu 1\nR 1\nfoo 2\n",
                           "swfc-model 1\nspectrum a\nlambda -2\nmu 2\nR 1\ngamma 2 1 0 1.0\n"}) {
    try {
      parse_model_file(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Parse) << text;
    }
  }
  try {
    load_model(data("invalid/bad.model"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
  }
}

TEST(ModelFile, RoundTrip) {
  auto mf = parse_model_file(detail::read_file(data("models/pair.model")));
  auto again = parse_model_file(write_model_file(mf));
  ASSERT_EQ(mf.gamma.size(), again.gamma.size());
  for (std::size_t i = 0; i < mf.gamma.size(); ++i) EXPECT_EQ(mf.gamma[i].value, again.gamma[i].value);
  EXPECT_EQ(mf.lambda, again.lambda);
  EXPECT_EQ(mf.R, again.R);
}

TEST(Restriction, SubWindowKeepsCommonEntries) {
  auto m = load_model(data("models/pair.model"));
  auto r = m.restricted(-1.3, 1.2);
  EXPECT_EQ(r.dim(), 2u);
  EXPECT_TRUE(r.gamma().empty());  // a lone spinor mode carries no invariant cubic
  EXPECT_THROW(m.restricted(-5.0, 5.0), Error);
}
