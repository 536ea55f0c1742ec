#include <gtest/gtest.h>
#include <unistd.h>

#include <optional>

#include "swfc/swf_invariant.hpp"
#include "test_support.hpp"

using namespace swfc;
using swfc_test::data;
using swfc_test::oracle;

namespace {

GridSpec grid(int n, double T = 0.0, bool shortcut = false) {
  GridSpec g;
  g.cubes_per_side = n;
  g.flow.T = T;
  g.allow_shortcut = shortcut;
  return g;
}

GradedGroup with_offset(GradedGroup g, Rational r) {
  g.set_offset(r);
  return g;
}

}  // namespace

TEST(SwfHomology, UncoupledWindowGivesSphereZero) {
  // One negative form mode and one negative spinor mode below 0: V^0 has real dimension 3.
  auto spec = load_spectrum(data("spectra/poincare_like.spec"));
  TruncatedModel m(spec, -3.0, 3.0, 1.0, CouplingTensor(6));
  auto r = swf_homology(m, grid(16, 0.0, true), Rational(0));
  EXPECT_TRUE(r.shortcut);
  EXPECT_EQ(r.raw, GradedGroup::sphere(3));
  EXPECT_EQ(r.shifted, GradedGroup::sphere(0));
  for (int d = -4; d <= 4; ++d) EXPECT_EQ(r.shifted.rank(d), r.raw.rank(d + 3));
}

TEST(SwfHomology, GridAgreesWithShortcutOnSmallWindows) {
  auto base = load_model(data("models/gapped.model"));
  for (auto [l, mu] : {std::pair{-2.0, 2.0}, std::pair{-2.0, 3.0}}) {
    auto m = base.restricted(l, mu);
    auto g = swf_homology(m, grid(m.dim() > 2 ? 32 : 24, 0.25), Rational(0));
    ASSERT_FALSE(g.shortcut);
    EXPECT_TRUE(g.certificate.all());
    EXPECT_EQ(g.shifted, GradedGroup::sphere(0)) << l << " " << mu;
    auto s = swf_homology(m, grid(16, 0.0, true), Rational(0));
    EXPECT_TRUE(s.shortcut);
    EXPECT_EQ(g.raw, s.raw);
  }
}

TEST(SwfHomology, PoincareLikeIsCPlus) {
  const auto& o = oracle()["poincare_like"];
  auto m = load_model(data("models/poincare_like.model"));
  Rational n = parse_rational(o["n_invariant"].get<std::string>());
  auto r = swf_homology(m, grid(16, 0.0, true), n);
  EXPECT_TRUE(r.shortcut);
  EXPECT_EQ(r.raw, GradedGroup::sphere(o["m"].get<int>() + 2 * o["n"].get<int>()));
  EXPECT_EQ(r.shifted, with_offset(GradedGroup::sphere(0), Rational(2)));
  EXPECT_EQ(effective(r.shifted), GradedGroup::sphere(2));
}

TEST(SwfHomology, EmptyWindow) {
  auto spec = load_spectrum(data("spectra/gapped.spec"));
  TruncatedModel m(spec, -1.0, 1.0, 1.0, CouplingTensor(0));
  ASSERT_EQ(m.dim(), 0u);
  auto r = swf_homology(m, grid(16), Rational(0));
  EXPECT_EQ(r.raw, GradedGroup::sphere(0));
  EXPECT_EQ(r.shifted, GradedGroup::sphere(0));
}

TEST(SwfHomology, ShiftBookkeeping) {
  auto m = load_model(data("models/s3_like.model"));
  auto r = swf_homology(m, grid(16, 0.0, true), Rational(3, 8));
  const auto& o = oracle()["s3_like"]["small"];
  int sh = o["m"].get<int>() + 2 * o["n"].get<int>();
  EXPECT_EQ(r.raw, GradedGroup::sphere(sh));
  EXPECT_EQ(r.shifted.offset(), Rational(-3, 4));
  for (int d = -2; d <= 2; ++d) EXPECT_EQ(r.shifted.rank(d), r.raw.rank(d + sh));
  EXPECT_THROW(effective(r.shifted), Error);
}

TEST(SwfHomology, StrongCouplingIsNotShortcut) {
  auto m = load_model(data("models/poincare_like_strong.model"));
  EXPECT_FALSE(m.gapped_shortcut_applies());
}

TEST(FixedPoints, FormPartIsMorseSphere) {
  auto m = load_model(data("models/poincare_like.model"));
  auto g = fixed_point_index(m, grid(16, 0.0, true));
  EXPECT_EQ(g, GradedGroup::sphere(reducible_morse_index(m.window()).m));
  auto gap = load_model(data("models/gapped.model")).restricted(-2.0, 3.0);
  EXPECT_EQ(fixed_point_index(gap, grid(24, 0.25)), GradedGroup::sphere(1));
}

TEST(CutoffIndependence, UncoupledWindows) {
  auto base = load_model(data("models/gapped.model"));
  auto c = cutoff_independence(base, {-2.0, 2.0}, {-5.0, 5.0}, grid(16, 0.0, true), Rational(0));
  EXPECT_TRUE(c.identical());
  // 1D against 3D, both on the grid.
  Spectrum s({{-1.0, 1, Sector::Form}, {1.5, 1, Sector::Spinor}}, {"toy", 1, {}, {}});
  TruncatedModel t(s, -1.2, 2.0, 1.0, CouplingTensor(3));
  auto c2 = cutoff_independence(t, {-1.2, 1.2}, {-1.2, 2.0}, grid(32, 0.25), Rational(0));
  EXPECT_FALSE(c2.first.shortcut);
  EXPECT_EQ(c2.first.window.total_dim, 1u);
  EXPECT_EQ(c2.second.window.total_dim, 3u);
  EXPECT_TRUE(c2.identical()) << (c2.discrepancies.empty() ? "" : c2.discrepancies.front());
  EXPECT_EQ(c2.second.shifted, GradedGroup::sphere(0));
}

TEST(CutoffIndependence, DiscrepanciesAreReported) {
  GradedGroup a = GradedGroup::sphere(0), b = GradedGroup::sphere(1);
  auto d = compare_groups(a, b);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(compare_groups(a, with_offset(a, Rational(1, 8))).size(), 1u);
}

TEST(CutoffIndependence, CoupledSmallWindowAtDoubledResolution) {
  auto base = load_model(data("models/pair.model"));
  auto small = base.restricted(-1.3, 1.2);
  ASSERT_EQ(small.dim(), 2u);
  auto a = swf_homology(small, grid(32, 0.25), Rational(0));
  auto b = swf_homology(small, grid(64, 0.25), Rational(0));
  EXPECT_TRUE(a.certificate.all());
  EXPECT_TRUE(b.certificate.all());
  EXPECT_EQ(a.raw, b.raw);
  EXPECT_EQ(a.shifted, GradedGroup::sphere(0));
}

TEST(Decompose, UncoupledModelHasNoIrreducibles) {
  auto m = load_model(data("models/gapped.model")).restricted(-2.0, 2.0);
  auto d = decompose(m, grid(32, 0.25), 1.0);
  EXPECT_TRUE(d.certified);
  EXPECT_TRUE(d.I_irr_gt0.zero());
  EXPECT_TRUE(d.I_irr_le0.zero());
  EXPECT_EQ(d.I_S, GradedGroup::sphere(1));
  EXPECT_EQ(d.I_theta, GradedGroup::sphere(1));
  EXPECT_TRUE(d.theta_is_sphere);
  EXPECT_TRUE(d.first_sequence.exact());
  EXPECT_TRUE(d.second_sequence.exact());
  EXPECT_FALSE(d.irreducible_quotient_available);
}

TEST(Decompose, IrreducibleCircleAboveZero) {
  // Phase-line oracle: irreducible circle at x = -1/2, |z|^2 = 1/2 with CSD 1/8.
  const auto& o = oracle()["decomposition"];
  auto m = load_model(data("models/decomposition.model"));
  std::vector<double> p(3, 0.0);
  auto coords = m.coordinates();
  for (std::size_t i = 0; i < 3; ++i)
    p[i] = coords[i].sector == Sector::Form ? o["irreducible_x"].get<double>()
                                            : (coords[i].component == 0 ? std::sqrt(o["irreducible_r2"].get<double>()) : 0.0);
  EXPECT_NEAR(m.csd(p), o["irreducible_csd"].get<double>(), 1e-12);
  auto g = grid(96, 0.25);
  std::optional<MultivaluedMap> memo;
  g.map_provider = [&](const TruncatedModel& mm, const CubicalSet& A, const FlowMapOptions& fo) {
    if (!memo) memo = flow_map_outer(mm, A, fo);
    return *memo;
  };
  auto d = decompose(m, g, 0.05);
  EXPECT_TRUE(d.certified);
  EXPECT_EQ(d.I_S, GradedGroup::sphere(2));
  EXPECT_EQ(d.I_S_le0, GradedGroup::sphere(0));
  EXPECT_EQ(d.I_irr_gt0.rank(1), 1);
  EXPECT_EQ(d.I_irr_gt0.rank(2), 1);
  EXPECT_TRUE(d.I_irr_le0.zero());
  EXPECT_EQ(d.I_theta, GradedGroup::sphere(0));
  EXPECT_TRUE(d.first_sequence.exact());
  EXPECT_TRUE(d.second_sequence.exact());
  // Reduced Euler characteristics add across the first sequence.
  EXPECT_EQ(d.I_S.euler_characteristic() - 1,
            (d.I_S_le0.euler_characteristic() - 1) + (d.I_irr_gt0.euler_characteristic() - 1) + 1);
  // A level window reaching past the circle's CSD is not a good perturbation.
  try {
    decompose(m, g, 0.5);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotGoodPerturbation);
  }
}

TEST(Decompose, ZeroEpsilonIsRejected) {
  auto m = load_model(data("models/decomposition.model"));
  try {
    decompose(m, grid(32, 0.25), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotGoodPerturbation);
  }
}
