#include <unistd.h>

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "swfc/lattice.hpp"
#include "test_support.hpp"

using namespace swfc;
using swfc_test::data;
using swfc_test::oracle;

namespace {

IntersectionForm diag_plus_e8(int m, int copies) {
  auto f = IntersectionForm::diagonal(m);
  for (int k = 0; k < copies; ++k) f = f.direct_sum(IntersectionForm::minus_e8());
  return f;
}

// Brute force on the mod-2 definition: c.x = x.x for all x in {0,1}^n.
bool characteristic_naive(const IntersectionForm& f, const IntVector& c) {
  const std::size_t n = f.rank();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    IntVector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = (mask >> i) & 1u;
    long long d = f.pair(c, x) - f.square(x);
    if (d % 2 != 0) return false;
  }
  return true;
}

}  // namespace

TEST(Lattice, GramFilesMatchOracle) {
  for (const char* name : {"diag2", "diag3", "minus_e8", "diag3_e8", "diag3_e8x2"}) {
    auto f = load_gram(data(std::string("lattice/") + name + ".gram"));
    const auto& o = oracle()["lattice"][name];
    EXPECT_EQ(f.rank(), o["rank"].get<std::size_t>()) << name;
    EXPECT_EQ(f.determinant(), BigInt(o["det"].get<long long>())) << name;
    EXPECT_EQ(f.negative_definite(), o["negative_definite"].get<bool>()) << name;
    EXPECT_TRUE(f.unimodular()) << name;
  }
}

TEST(Lattice, MinusE8IsEvenUnimodular) {
  auto e = IntersectionForm::minus_e8();
  EXPECT_TRUE(e.even());
  EXPECT_EQ(e.determinant(), BigInt(1));
  EXPECT_TRUE(e.negative_definite());
  EXPECT_EQ(e.blocks().size(), 1u);
  IntersectionForm pos(std::vector<IntVector>{{1, 0}, {0, -1}});
  EXPECT_FALSE(pos.negative_definite());
}

TEST(Lattice, DiagonalBoundOneGivesSignVectors) {
  for (int m = 1; m <= 6; ++m) {
    auto f = IntersectionForm::diagonal(m);
    auto cs = characteristic_vectors(f, 1);
    ASSERT_EQ(cs.size(), std::size_t(1) << m);
    for (const auto& c : cs)
      for (auto v : c) EXPECT_EQ(std::abs(v), 1);
  }
}

TEST(Lattice, DiagonalTwoBoundThree) {
  auto f = IntersectionForm::diagonal(2);
  auto cs = characteristic_vectors(f, 3);
  EXPECT_EQ(cs.size(), oracle()["lattice"]["diag2_bound3"]["count"].get<std::size_t>());
  long long best = -1000;
  for (const auto& c : cs) {
    EXPECT_TRUE(c[0] % 2 != 0 && c[1] % 2 != 0);
    best = std::max(best, f.square(c));
  }
  EXPECT_EQ(best, oracle()["lattice"]["diag2_bound3"]["max_c_sq"].get<long long>());
}

TEST(Lattice, E8ContainsZero) {
  auto cs = characteristic_vectors(IntersectionForm::minus_e8(), 2);
  EXPECT_TRUE(std::binary_search(cs.begin(), cs.end(), IntVector(8, 0)));
  for (std::size_t k = 0; k < cs.size(); k += 997) EXPECT_EQ(cs[k][0] % 2, 0);
}

TEST(Lattice, CharacteristicMatchesNaive) {
  IntersectionForm f(std::vector<IntVector>{{-3, 1, 0}, {1, -2, 1}, {0, 1, -5}});
  auto cs = characteristic_vectors(f, 2);
  std::set<IntVector> got(cs.begin(), cs.end());
  IntVector c(3);
  std::size_t count = 0;
  for (c[0] = -2; c[0] <= 2; ++c[0])
    for (c[1] = -2; c[1] <= 2; ++c[1])
      for (c[2] = -2; c[2] <= 2; ++c[2]) {
        bool want = characteristic_naive(f, c);
        EXPECT_EQ(got.count(c) == 1, want);
        count += want;
      }
  EXPECT_EQ(count, cs.size());
}

TEST(Lattice, NegationClosedAndSorted) {
  std::vector<IntersectionForm> forms{IntersectionForm::diagonal(4), IntersectionForm::minus_e8(),
                                      IntersectionForm(std::vector<IntVector>{{-3, 1}, {1, -2}})};
  for (const auto& f : forms) {
    auto cs = characteristic_vectors(f, 2);
    EXPECT_TRUE(std::is_sorted(cs.begin(), cs.end()));
    std::set<IntVector> s(cs.begin(), cs.end());
    for (const auto& c : cs) {
      IntVector neg(c);
      for (auto& v : neg) v = -v;
      EXPECT_TRUE(s.count(neg));
    }
  }
}

TEST(Lattice, WorkersDoNotChangeOutput) {
  auto f = diag_plus_e8(1, 1);
  EnumerationOptions one, four;
  four.workers = 4;
  EXPECT_EQ(characteristic_vectors(f, 1, one), characteristic_vectors(f, 1, four));
}

TEST(Lattice, MaxOverDiagonalIsMinusM) {
  for (int m = 1; m <= 8; ++m) {
    auto f = IntersectionForm::diagonal(m);
    auto cs = characteristic_vectors(f, 2);
    long long best = -1000;
    for (const auto& c : cs) best = std::max(best, f.square(c));
    EXPECT_EQ(best, -m);
    for (const auto& c : cs) {
      bool unit = std::all_of(c.begin(), c.end(), [](long long v) { return std::abs(v) == 1; });
      EXPECT_EQ(f.square(c) == -m, unit);
    }
  }
}

TEST(Lattice, FroyshovDiagonal) {
  for (int m = 1; m <= 10; ++m) {
    auto r = froyshov_check(IntersectionForm::diagonal(m), Rational(0));
    EXPECT_EQ(r.max_value, Rational(0));
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(r.certified);
    EXPECT_EQ(r.c_sq, -m);
  }
}

TEST(Lattice, FroyshovWithE8) {
  for (int m = 0; m <= 3; ++m) {
    auto r = froyshov_check(diag_plus_e8(m, 1), Rational(1));
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(r.equality);
    EXPECT_TRUE(r.certified);
    EXPECT_EQ(r.c_sq, -m);
    EXPECT_EQ(r.max_value, Rational(1));

    auto two = froyshov_check(diag_plus_e8(m, 2), Rational(1));
    EXPECT_EQ(two.max_value, Rational(2));
    EXPECT_FALSE(two.pass);
  }
  auto csv = froyshov_csv(froyshov_check(diag_plus_e8(3, 2), Rational(1)));
  EXPECT_NE(csv.find("max_value,2/1\n"), std::string::npos);
  EXPECT_NE(csv.find("pass,false\n"), std::string::npos);
}

TEST(Lattice, FroyshovSearchedBlockNotCertified) {
  IntersectionForm f(std::vector<IntVector>{{-3, 1}, {1, -2}});
  auto r = froyshov_check(f, Rational(0));
  ASSERT_EQ(r.blocks.size(), 1u);
  EXPECT_EQ(r.blocks[0].kind, "searched");
  EXPECT_FALSE(r.certified);
  EXPECT_TRUE(f.characteristic(r.witness));
  EXPECT_THROW(froyshov_check(IntersectionForm(std::vector<IntVector>{{1}}), Rational(0)), Error);
}

TEST(Lattice, UpperBoundAndRelativeDegree) {
  EXPECT_EQ(s_upper_bound(Rational(-1), 1), Rational(2));
  EXPECT_EQ(s_upper_bound(Rational(0), 0), Rational(0));
  EXPECT_THROW(s_upper_bound(Rational(0), -1), Error);
  for (long long s : {-3LL, 0LL, 5LL}) EXPECT_EQ(relative_degree(s, s), Rational(0));
  for (long long m = 0; m <= 4; ++m) EXPECT_EQ(relative_degree(-m, -m - 8), Rational(1));
  EXPECT_EQ(relative_degree(8, 0), Rational(1));
}

TEST(Lattice, TomDieckSigns) {
  auto q = default_q_samples();
  EXPECT_EQ(tom_dieck_limit(0, q).kind, LimitKind::One);
  EXPECT_EQ(tom_dieck_limit(-1, q).kind, LimitKind::Zero);
  EXPECT_EQ(tom_dieck_limit(2, q).kind, LimitKind::Divergent);
  for (int d = -3; d <= 3; ++d) EXPECT_TRUE(tom_dieck_limit(d, q).matches_sign) << d;
  EXPECT_STREQ(to_string(LimitKind::Divergent), "divergent");
  EXPECT_THROW(tom_dieck_limit(1, {std::complex<double>(1.0, 0.0)}), Error);
  EXPECT_THROW(tom_dieck_limit(1, {std::complex<double>(0.5, 0.0)}), Error);
}

TEST(Lattice, BudgetAndParseErrors) {
  EnumerationOptions small;
  small.budget = 100;
  try {
    characteristic_vectors(IntersectionForm::diagonal(5), 2, small);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SearchSpaceTooLarge);
  }
  for (const char* bad : {"", "1 2\n3\n", "1 2\n3 4\n", "-1 0 0\n0 -1 0\n", "-1 x\nx -1\n"}) {
    try {
      parse_gram(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Parse) << bad;
    }
  }
  auto f = diag_plus_e8(2, 1);
  auto g = parse_gram("# comment\n" + write_gram(f));
  EXPECT_EQ(g.gram(), f.gram());
}
