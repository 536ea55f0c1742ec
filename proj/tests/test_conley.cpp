#include <gtest/gtest.h>

#include <cmath>

#include "swfc/conley.hpp"
#include "swfc/homology.hpp"

using namespace swfc;

namespace {

Box square(double a, std::size_t d) { return {std::vector<double>(d, -a), std::vector<double>(d, a)}; }

CubeIndex cube_at(const GridFrame& f, std::vector<double> x) {
  std::vector<int> m(f.dim());
  for (std::size_t k = 0; k < f.dim(); ++k) m[k] = static_cast<int>(std::floor((x[k] - f.origin[k]) / f.h));
  return f.linear(m.data());
}

template <class Field>
struct Setup {
  CubicalSet A;
  MultivaluedMap F;
};

template <class Field>
Setup<Field> setup(const Field& f, double half, int n) {
  auto A = build_grid(square(half, f.dim()), 2 * half / n);
  return {A, flow_map_outer(f, A)};
}

GradedGroup conley_index(const MultivaluedMap& F, const CubicalSet& A) {
  CubicalSet empty(A.frame());
  auto ip = index_pair(F, A, empty, empty);
  EXPECT_TRUE(ip.certificate.all());
  return relative_homology(ip.N, ip.L);
}

}  // namespace

TEST(Isolation, BoxAroundSaddleIsIsolating) {
  auto s = setup(saddle_field(), 1.0, 32);
  auto c = isolating_check(s.F, s.A);
  EXPECT_TRUE(c.ok);
  EXPECT_GE(c.margin, 1);
  // A box whose invariant part reaches the boundary: the double well on [-1, 1].
  auto f = double_well_field();
  auto A = build_grid({{-1.0}, {1.0}}, 2.0 / 64);
  EXPECT_FALSE(isolating_check(flow_map_outer(f, A), A).ok);
}

TEST(POperator, ContainsSeedAndIsClosed) {
  DiagonalLinearField in{{1.0, 1.0}};
  auto s = setup(in, 1.0, 16);
  CubicalSet B(s.A.frame(), {cube_at(s.A.frame(), {0.9, 0.9})});
  auto P = p_operator(s.F, B, s.A);
  EXPECT_TRUE(B.subset_of(P));
  EXPECT_EQ(p_operator(s.F, P, s.A), P);
  EXPECT_TRUE(P.contains(cube_at(s.A.frame(), {0.01, 0.01})));
  CubicalSet B2(s.A.frame(), {cube_at(s.A.frame(), {-0.9, 0.5})});
  auto both = p_operator(s.F, B.unite(B2), s.A);
  EXPECT_EQ(both, P.unite(p_operator(s.F, B2, s.A)));
  CubicalSet outside(s.A.frame(), {0});
  CubicalSet small(s.A.frame(), {1});
  EXPECT_THROW(p_operator(s.F, outside, small), Error);
}

TEST(IndexPair, SaddleIsCircleLike) {
  auto s = setup(saddle_field(), 1.0, 32);
  EXPECT_EQ(conley_index(s.F, s.A), GradedGroup::sphere(1));
}

TEST(IndexPair, OneDimensionalRepeller) {
  DiagonalLinearField out{{-1.0}};
  auto s = setup(out, 1.0, 32);
  EXPECT_EQ(conley_index(s.F, s.A), GradedGroup::sphere(1));
}

TEST(IndexPair, TwoDimensionalAttractor) {
  DiagonalLinearField in{{1.0, 1.0}};
  auto s = setup(in, 1.0, 32);
  EXPECT_EQ(conley_index(s.F, s.A), GradedGroup::sphere(0));
}

TEST(IndexPair, LinearFieldsGiveMorseIndexSpheres) {
  for (int d = 1; d <= 3; ++d)
    for (int k = 0; k <= d; ++k) {
      DiagonalLinearField f;
      for (int i = 0; i < d; ++i) f.nu.push_back(i < k ? -1.0 : 1.0);
      auto s = setup(f, 1.0, 24);
      EXPECT_EQ(conley_index(s.F, s.A), GradedGroup::sphere(k)) << d << " " << k;
    }
}

TEST(IndexPair, WholeBoxIsNotAnIndexPairForTheSaddle) {
  auto s = setup(saddle_field(), 1.0, 32);
  auto S = invariant_part(s.F, s.A);
  auto c = verify_index_pair(s.F, s.A, CubicalSet(s.A.frame()), S);
  EXPECT_FALSE(c.cond2);
  EXPECT_FALSE(c.all());
}

TEST(IndexPair, RespectsK1AndK2) {
  auto s = setup(saddle_field(), 1.0, 32);
  const auto& f = s.A.frame();
  CubicalSet K1(f, {cube_at(f, {0.5, 0.01})});
  CubicalSet K2(f, {cube_at(f, {0.95, 0.95})});
  auto ip = index_pair(s.F, s.A, K1, K2);
  EXPECT_TRUE(ip.certificate.all());
  EXPECT_TRUE(K1.subset_of(ip.N));
  EXPECT_TRUE(K2.subset_of(ip.L));
  EXPECT_EQ(relative_homology(ip.N, ip.L), GradedGroup::sphere(1));
}

TEST(IndexPair, HypothesisViolations) {
  auto s = setup(saddle_field(), 1.0, 32);
  const auto& f = s.A.frame();
  // The stable manifold is the y axis, so these cubes lie in A+.
  CubicalSet onaxis(f, {cube_at(f, {0.01, 0.97})});
  try {
    index_pair(s.F, s.A, CubicalSet(f), onaxis);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HypothesisViolationII);
  }
  try {
    index_pair(s.F, s.A, onaxis, CubicalSet(f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HypothesisViolationI);
  }
}

TEST(AttractorRepeller, DoubleWellSplit) {
  auto f = double_well_field();
  auto A = build_grid({{-2.0}, {2.0}}, 4.0 / 64);
  auto F = flow_map_outer(f, A);
  auto range = sampled_range(A.frame(), [](std::span<const double> x) { return double_well_energy(x[0]); });
  auto ar = attractor_repeller(F, A, range, -0.1, may_contain_zero(A.frame(), f));
  EXPECT_TRUE(ar.all_certified());
  EXPECT_EQ(ar.morse.size(), 3u);
  EXPECT_EQ(relative_homology(ar.N1, ar.N3), GradedGroup::sphere(0));
  EXPECT_EQ(relative_homology(ar.N2, ar.N3), GradedGroup::sphere(0, 2));
  EXPECT_EQ(relative_homology(ar.N1, ar.N2), GradedGroup::sphere(1));
  auto les = les_exactness(ar.N1, ar.N2, ar.N3);
  EXPECT_TRUE(les.exact());
  EXPECT_EQ(les.chi13, les.chi12 + les.chi23);
  EXPECT_TRUE(ar.T.subset_of(ar.N2));
}

TEST(AttractorRepeller, LevelBelowEverything) {
  auto f = double_well_field();
  auto A = build_grid({{-2.0}, {2.0}}, 4.0 / 64);
  auto F = flow_map_outer(f, A);
  auto range = sampled_range(A.frame(), [](std::span<const double> x) { return double_well_energy(x[0]); });
  auto ar = attractor_repeller(F, A, range, -1.0, may_contain_zero(A.frame(), f));
  EXPECT_TRUE(ar.T.empty());
  EXPECT_EQ(ar.N2, ar.N3);
  EXPECT_TRUE(relative_homology(ar.N2, ar.N3).zero());
  EXPECT_EQ(relative_homology(ar.N1, ar.N2), relative_homology(ar.N1, ar.N3));
}

TEST(AttractorRepeller, LevelThroughAMorseSetIsRejected) {
  auto f = double_well_field();
  auto A = build_grid({{-2.0}, {2.0}}, 4.0 / 64);
  auto F = flow_map_outer(f, A);
  auto range = sampled_range(A.frame(), [](std::span<const double> x) { return double_well_energy(x[0]); });
  try {
    attractor_repeller(F, A, range, 0.0, may_contain_zero(A.frame(), f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotRegularLevel);
  }
}

TEST(Refinement, ConleyIndexIsStable) {
  for (int n : {24, 48, 96}) {
    auto s = setup(saddle_field(), 1.0, n);
    EXPECT_EQ(conley_index(s.F, s.A), GradedGroup::sphere(1)) << n;
  }
  for (int n : {32, 64, 128}) {
    auto s = setup(double_well_field(), 2.0, n);
    EXPECT_EQ(conley_index(s.F, s.A), GradedGroup::sphere(0)) << n;
  }
}

TEST(Certificate, JsonListsConditions) {
  auto s = setup(saddle_field(), 1.0, 32);
  CubicalSet empty(s.A.frame());
  auto ip = index_pair(s.F, s.A, empty, empty);
  auto j = certificate_json(ip.certificate);
  EXPECT_NE(j.find("cond1"), std::string::npos);
  EXPECT_NE(write_index_pair(ip).find("swfc"), std::string::npos);
}
