#include <gtest/gtest.h>
#include <unistd.h>

#include <cmath>
#include <algorithm>
#include <functional>

#include "swfc/spectral_flow.hpp"
#include "test_support.hpp"

using namespace swfc;
using swfc_test::data;
using swfc_test::oracle;

namespace {

SpectrumPath sampled(int samples, const std::function<std::vector<EigenMode>(double)>& modes) {
  SpectrumPath p;
  for (int k = 0; k <= samples; ++k) {
    double t = static_cast<double>(k) / samples;
    p.times.push_back(t);
    auto m = modes(t);
    std::sort(m.begin(), m.end(), mode_order);
    p.spectra.emplace_back(m, SpectrumInfo{});
  }
  return p;
}

// Signed sign changes of v(t) + eps on a dense grid.
int dense_crossings(const std::function<double(double)>& v, double eps) {
  int c = 0;
  double prev = v(0) + eps;
  for (int k = 1; k <= 100000; ++k) {
    double cur = v(k / 100000.0) + eps;
    if (prev < 0 && cur > 0) ++c;
    if (prev > 0 && cur < 0) --c;
    prev = cur;
  }
  return c;
}

}  // namespace

TEST(SpectralFlow, ConstantPath) {
  auto p = sampled(8, [](double) { return std::vector<EigenMode>{{-1.0, 1, Sector::Spinor}, {2.0, 1, Sector::Spinor}}; });
  EXPECT_EQ(spectral_flow(p, 0.1), 0);
}

TEST(SpectralFlow, SingleRisingBranch) {
  auto p = sampled(16, [](double t) { return std::vector<EigenMode>{{t - 0.5, 1, Sector::Spinor}}; });
  EXPECT_EQ(spectral_flow(p, 0.1), 1);
  EXPECT_EQ(spectral_flow(p.reversed(), 0.1), -1);
}

TEST(SpectralFlow, TwoOpposingBranchesAgainstDenseSignChanges) {
  auto up = [](double t) { return t - 0.47; };
  auto down = [](double t) { return 0.47 - t; };
  auto p = sampled(20, [&](double t) {
    return std::vector<EigenMode>{{up(t), 1, Sector::Spinor}, {down(t), 1, Sector::Spinor}};
  });
  for (double eps : {0.05, 0.1, 0.2}) {
    int oracle_count = dense_crossings(up, eps) + dense_crossings(down, eps);
    EXPECT_EQ(spectral_flow(p, eps), oracle_count);
    EXPECT_EQ(oracle_count, 0);
  }
}

TEST(SpectralFlow, MultiplicityAndFormLines) {
  auto p = sampled(10, [](double t) {
    return std::vector<EigenMode>{{t - 0.55, 2, Sector::Spinor}, {0.53 - t, 1, Sector::Form}};
  });
  auto d = spectral_flow_detail(p, 0.1);
  EXPECT_EQ(d.spinor, 2);
  EXPECT_EQ(d.form, -1);
}

TEST(SpectralFlow, ConcatenationIsAdditive) {
  auto a = load_path(data("paths/one_crossing.path"));
  auto b = load_path(data("paths/double_rise.path"));
  double eps = 0.1;
  EXPECT_EQ(spectral_flow(a.concat(a.reversed()), eps), 0);
  auto c = sampled(4, [&](double) {
    auto m = a.spectra.back().modes();
    return m;
  });
  EXPECT_EQ(spectral_flow(a.concat(c), eps), spectral_flow(a, eps) + spectral_flow(c, eps));
  EXPECT_EQ(spectral_flow(b.concat(b.reversed()), eps), 0);
}

TEST(SpectralFlow, FixturePathsMatchOracle) {
  for (const char* name : {"one_crossing", "two_branches", "double_rise"}) {
    const auto& o = oracle()["paths"][name];
    auto p = load_path(data(std::string("paths/") + name + ".path"));
    EXPECT_EQ(spectral_flow(p, 0.1), o["sf_eps_0.1"].get<int>()) << name;
    EXPECT_NEAR(default_epsilon(p), o["default_epsilon"].get<double>(), 1e-12) << name;
    auto r = sf_consistency(p, parse_rational(o["n0"].get<std::string>()), parse_rational(o["n1"].get<std::string>()));
    EXPECT_EQ(r.sf, o["sf_default"].get<int>()) << name;
    EXPECT_EQ(r.lambda, o["lambda"].get<double>()) << name;
    EXPECT_EQ(r.n_lambda_start, o["n_lambda_start"].get<int>()) << name;
    EXPECT_EQ(r.n_lambda_end, o["n_lambda_end"].get<int>()) << name;
    EXPECT_TRUE(r.holds()) << name << ": " << (r.violations.empty() ? "" : r.violations.front());
  }
}

TEST(SpectralFlow, MismatchIsReported) {
  auto p = load_path(data("paths/one_crossing.path"));
  auto r = sf_consistency(p, Rational(0), Rational(3));
  EXPECT_FALSE(r.holds());
  EXPECT_EQ(r.violations.size(), 1u);
  EXPECT_NE(sf_consistency_csv(r).find("holds,false"), std::string::npos);
}

TEST(SpectralFlow, Errors) {
  auto onlevel = sampled(4, [](double t) { return std::vector<EigenMode>{{t - 0.35, 1, Sector::Spinor}}; });
  try {
    spectral_flow(onlevel, 0.1);  // t = 0.25 lands on -0.1
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CrossingOnEndpoint);
  }
  SpectrumPath amb;
  amb.times = {0.0, 1.0};
  amb.spectra = {Spectrum({{0.0, 1, Sector::Spinor}, {0.2, 1, Sector::Spinor}}, {}),
                 Spectrum({{0.1, 1, Sector::Spinor}, {0.1 + 1e-7, 1, Sector::Spinor}}, {})};
  try {
    spectral_flow(amb, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AmbiguousMatching);
  }
  SpectrumPath grow = amb;
  grow.spectra[1] = Spectrum({{0.1, 1, Sector::Spinor}}, {});
  EXPECT_THROW(spectral_flow(grow, 0.5), Error);
}

TEST(SpectralFlow, PathFileRoundTrip) {
  auto p = load_path(data("paths/double_rise.path"));
  auto q = parse_path(write_path(p));
  ASSERT_EQ(q.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(q.times[i], p.times[i]);
    EXPECT_EQ(q.spectra[i].size(), p.spectra[i].size());
  }
  EXPECT_THROW(parse_path("sample 0\nmode x 1 spinor\n"), Error);
}

TEST(Eta, SymmetricSpectrumVanishes) {
  auto s = load_spectrum(data("spectra/eta_symmetric.spec"));
  EXPECT_NEAR(eta_invariant(s).value, oracle()["eta_symmetric"]["eta"].get<double>(), 1e-8);
  auto raw = load_spectrum(data("spectra/eta_symmetric_raw.spec"));
  EXPECT_NEAR(eta_invariant(raw).value, 0.0, 1e-8);
}

TEST(Eta, SinglePositiveMode) {
  Spectrum s({{1.0, 1, Sector::Spinor}}, {});
  auto r = eta_invariant(s);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  for (double v : r.partial) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Eta, HurwitzToyMatchesClosedForm) {
  auto s = load_spectrum(data("spectra/eta_toy.spec"));
  auto r = eta_invariant(s);
  EXPECT_NEAR(r.value, oracle()["eta_toy"]["eta"].get<double>(), 1e-4);
  EXPECT_TRUE(r.smoothed);
}

TEST(Eta, Validation) {
  Spectrum s({{1.0, 1, Sector::Spinor}}, {});
  EtaOptions bad;
  bad.s_grid = {0.5};
  EXPECT_THROW(eta_invariant(s, bad), Error);
  bad.s_grid = {0.5, -0.1};
  EXPECT_THROW(eta_invariant(s, bad), Error);
}

TEST(NInvariantTest, Examples) {
  EXPECT_EQ(n_invariant(0, 0, 0, 1).value, Rational(0));
  EXPECT_EQ(n_invariant(0.5, 0, 0, 1).value, Rational(1, 4));
  const auto& o = oracle()["poincare_like"];
  auto p = n_invariant(o["eta_dir"].get<double>(), o["k_dirac"].get<int>(), o["eta_sign"].get<double>(), 1);
  EXPECT_EQ(p.value, Rational(-1));
  EXPECT_EQ(format_rational(p.value), o["n_invariant"].get<std::string>());
  try {
    n_invariant(0.01, 0, 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotNearLattice);
  }
  NOptions integral;
  integral.integral = true;
  EXPECT_THROW(n_invariant(0.5, 0, 0, 1, integral), Error);
  auto fine = n_invariant(1.0 / 12.0, 0, 0, 3);
  EXPECT_EQ(fine.value, Rational(1, 24));
}

TEST(NInvariantTest, LatticeProperty) {
  for (int N : {1, 2, 5})
    for (int p = -20; p <= 20; ++p) {
      double eta = 2.0 * p / (8.0 * N);
      auto r = n_invariant(eta, 0, 0, N);
      EXPECT_EQ(r.value, Rational(p, 8 * N));
      EXPECT_LT(r.distance, 1e-12);
    }
}

TEST(DiracKernel, CountsZeroSpinorModes) {
  Spectrum s({{-0.5, 1, Sector::Form}, {0.0, 2, Sector::Spinor}, {1.0, 1, Sector::Spinor}}, {});
  EXPECT_EQ(dirac_kernel(s), 2);
  EXPECT_EQ(n_lambda(s, -1.0), 2);
}
