#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "swfc/cubical.hpp"
#include "swfc/ode.hpp"
#include "swfc/swflow.hpp"

using namespace swfc;

namespace {

CubeIndex cube_of(const GridFrame& f, std::span<const double> x) {
  std::vector<int> m(f.dim());
  for (std::size_t k = 0; k < f.dim(); ++k) {
    m[k] = static_cast<int>(std::floor((x[k] - f.origin[k]) / f.h));
    if (m[k] < 0 || m[k] >= f.extent[k]) return -1;
  }
  return f.linear(m.data());
}

Box square(double a, std::size_t d) { return {std::vector<double>(d, -a), std::vector<double>(d, a)}; }

}  // namespace

TEST(Grid, UnitSquareHalfSpacing) {
  auto g = build_grid({{0, 0}, {1, 1}}, 0.5);
  EXPECT_EQ(g.size(), 4u);
  auto big = build_grid(square(1.0, 4), 2.0 / 16);
  EXPECT_EQ(big.size(), 65536u);
  try {
    build_grid(square(1.0, 4), 2.0 / 16, 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridTooLarge);
  }
}

TEST(Grid, LinearIndexRoundTrip) {
  GridFrame f{{0, 0, 0}, 0.1, {3, 5, 7}};
  std::vector<int> m(3);
  for (CubeIndex i = 0; i < f.size(); ++i) {
    f.multi(i, m.data());
    EXPECT_EQ(f.linear(m.data()), i);
  }
  m = {1, 2, 3};
  EXPECT_EQ(f.linear(m.data()), (1 * 5 + 2) * 7 + 3);
}

TEST(SetOps, LatticeIdentities) {
  GridFrame f{{0, 0}, 1.0, {6, 6}};
  std::mt19937_64 rng(5);
  auto rand_set = [&] {
    Mask m(36);
    for (auto& v : m) v = rng() % 2;
    return CubicalSet::from_mask(f, m);
  };
  for (int it = 0; it < 20; ++it) {
    auto a = rand_set(), b = rand_set();
    EXPECT_EQ(a.unite(b).size() + a.intersect(b).size(), a.size() + b.size());
    EXPECT_TRUE(a.intersect(b).subset_of(a));
    EXPECT_TRUE(a.subset_of(a.unite(b)));
    EXPECT_TRUE(a.minus(b).intersect(b).empty());
    EXPECT_EQ(a.minus(b).unite(a.intersect(b)), a);
  }
}

TEST(FlowMap, LinearContractionImage) {
  DiagonalLinearField lin{{1.0}};
  auto A = build_grid({{-1}, {1}}, 0.25);
  FlowMapOptions opt;
  opt.T = std::log(2.0);
  auto F = flow_map_outer(lin, A, opt);
  EXPECT_DOUBLE_EQ(F.T(), std::log(2.0));
  // Cube [0.5, 0.75] flows onto [0.25, 0.375], inside the cube index 5.
  CubeIndex c = 6;
  auto im = F.images(c);
  EXPECT_TRUE(std::binary_search(im.begin(), im.end(), CubeIndex{5}));
  EXPECT_LE(im.size(), 3u);
  for (auto q : im) EXPECT_TRUE(q >= 4 && q <= 6) << q;
}

TEST(FlowMap, ImagesOutsideSupportStayPut) {
  Spectrum s({{0.5, 1, Sector::Form}}, {});
  TruncatedModel m(s, -1.0, 1.0, 0.25, CouplingTensor(1));
  auto A = build_grid({{-1.5}, {1.5}}, 0.1);
  FlowMapOptions opt;
  opt.T = 1.0;
  auto F = flow_map_outer(m, A, opt);
  std::vector<double> c(1);
  for (auto q : A) {
    A.frame().center(q, c.data());
    if (std::abs(c[0]) < 4 * m.R() + 0.1) continue;
    auto im = F.images(q);
    EXPECT_TRUE(std::binary_search(im.begin(), im.end(), q));
    for (auto r : im) EXPECT_LE(std::abs(r - q), 1);
  }
}

TEST(FlowMap, SaddleImagesContainSampledTrajectories) {
  auto f = saddle_field();
  auto A = build_grid(square(2.0, 2), 0.25);
  FlowMapOptions opt;
  opt.T = 0.3;
  auto F = flow_map_outer(f, A, opt);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> m(2);
  std::vector<double> x(2);
  int checked = 0;
  for (auto q : A) {
    A.frame().multi(q, m.data());
    auto im = F.images(q);
    for (int s = 0; s < 60; ++s) {
      for (int k = 0; k < 2; ++k) x[k] = A.frame().origin[k] + A.frame().h * (m[k] + u(rng));
      auto tr = integrate_field(f, x, F.T(), 1e-11);
      CubeIndex t = cube_of(A.frame(), tr.states.back());
      if (t < 0) {
        EXPECT_FALSE(F.box_inside_frame(q));
        continue;
      }
      EXPECT_TRUE(std::binary_search(im.begin(), im.end(), t)) << q << " -> " << t;
      ++checked;
    }
  }
  EXPECT_GT(checked, 10000);
}

TEST(FlowMap, WorkerCountDoesNotChangeTheMap) {
  auto f = saddle_field();
  auto A = build_grid(square(1.5, 2), 0.1);
  FlowMapOptions o1, o4;
  o1.T = o4.T = 0.2;
  o4.workers = 4;
  auto F1 = flow_map_outer(f, A, o1);
  auto F4 = flow_map_outer(f, A, o4);
  EXPECT_EQ(F1.raw_boxes(), F4.raw_boxes());
  EXPECT_EQ(write_map(F1), write_map(F4));
}

TEST(InvariantPart, SaddleShrinksToOrigin) {
  auto f = saddle_field();
  auto A = build_grid(square(1.5, 2), 0.1);
  FlowMapOptions opt;
  opt.T = 0.5;
  auto F = flow_map_outer(f, A, opt);
  auto inv = invariant_part(F, A);
  ASSERT_FALSE(inv.empty());
  std::vector<double> c(2), zero{0.01, 0.01};
  EXPECT_TRUE(inv.contains(cube_of(A.frame(), zero)));
  for (auto q : inv) {
    A.frame().center(q, c.data());
    EXPECT_LT(std::hypot(c[0], c[1]), 0.75);
  }
  auto parts = invariant_parts(F, A);
  EXPECT_TRUE(parts.invariant.subset_of(parts.forward));
  EXPECT_TRUE(parts.invariant.subset_of(parts.backward));
  EXPECT_EQ(parts.forward.intersect(parts.backward), parts.invariant);
}

TEST(InvariantPart, RepellingFieldKeepsOnlyTheCore) {
  DiagonalLinearField out{{-1.0, -1.0}};
  auto A = build_grid(square(1.0, 2), 0.125);
  FlowMapOptions opt;
  opt.T = 1.5;
  auto inv = invariant_part(flow_map_outer(out, A, opt), A);
  ASSERT_FALSE(inv.empty());
  std::vector<double> c(2);
  for (auto q : inv) {
    A.frame().center(q, c.data());
    EXPECT_LT(std::max(std::abs(c[0]), std::abs(c[1])), 0.3);
  }
}

TEST(InvariantPart, DoubleWellCoversTheInterval) {
  auto f = double_well_field();
  auto A = build_grid({{-1.5}, {1.5}}, 0.05);
  FlowMapOptions opt;
  opt.T = 0.3;
  auto inv = invariant_part(flow_map_outer(f, A, opt), A);
  std::vector<double> c(1);
  for (CubeIndex q = 0; q < A.frame().size(); ++q) {
    A.frame().center(q, c.data());
    if (std::abs(c[0]) < 1.0) {
      EXPECT_TRUE(inv.contains(q)) << c[0];
    }
    if (std::abs(c[0]) > 1.3) {
      EXPECT_FALSE(inv.contains(q)) << c[0];
    }
  }
}

TEST(Serialization, SetAndMapRoundTrip) {
  auto f = saddle_field();
  auto A = build_grid(square(1.0, 2), 0.2);
  auto ball = ball_cubes(A.frame(), 0.7);
  EXPECT_EQ(parse_cubical_set(write_cubical_set(ball)), ball);
  FlowMapOptions opt;
  opt.T = 0.2;
  auto F = flow_map_outer(f, A, opt);
  auto G = parse_map(write_map(F));
  EXPECT_EQ(G.domain(), F.domain());
  EXPECT_EQ(G.raw_boxes(), F.raw_boxes());
  EXPECT_EQ(G.T(), F.T());
  EXPECT_THROW(parse_cubical_set("swfc-cubical-set 9\n"), Error);
  EXPECT_THROW(parse_map("garbage"), Error);
}
