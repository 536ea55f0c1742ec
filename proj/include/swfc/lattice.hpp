#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "swfc/error.hpp"
#include "swfc/homology.hpp"
#include "swfc/snf.hpp"
#include "swfc/spectrum.hpp"

namespace swfc {

using IntVector = std::vector<long long>;

// ---------------------------------------------------------------------------
// Integral symmetric bilinear forms.

class IntersectionForm {
 public:
  IntersectionForm() = default;
  explicit IntersectionForm(std::vector<IntVector> gram) : g_(std::move(gram)) {
    const std::size_t n = g_.size();
    for (const auto& row : g_) require(row.size() == n, ErrorCode::InvalidArgument, "Gram matrix is not square");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        require(g_[i][j] == g_[j][i], ErrorCode::InvalidArgument, "Gram matrix is not symmetric");
  }

  static IntersectionForm diagonal(int m, long long value = -1) {
    std::vector<IntVector> g(m, IntVector(m, 0));
    for (int i = 0; i < m; ++i) g[i][i] = value;
    return IntersectionForm(std::move(g));
  }

  // Minus the E8 Cartan matrix: chain 0..6, node 7 hanging off node 4.
  static IntersectionForm minus_e8() {
    std::vector<IntVector> g(8, IntVector(8, 0));
    for (int i = 0; i < 8; ++i) g[i][i] = -2;
    auto link = [&](int a, int b) { g[a][b] = g[b][a] = 1; };
    for (int i = 0; i + 1 < 7; ++i) link(i, i + 1);
    link(4, 7);
    return IntersectionForm(std::move(g));
  }

  IntersectionForm direct_sum(const IntersectionForm& o) const {
    const std::size_t a = rank(), b = o.rank();
    std::vector<IntVector> g(a + b, IntVector(a + b, 0));
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < a; ++j) g[i][j] = g_[i][j];
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) g[a + i][a + j] = o.g_[i][j];
    return IntersectionForm(std::move(g));
  }

  std::size_t rank() const { return g_.size(); }
  const std::vector<IntVector>& gram() const { return g_; }
  long long at(std::size_t i, std::size_t j) const { return g_[i][j]; }

  bool even() const {
    for (std::size_t i = 0; i < rank(); ++i)
      if (g_[i][i] % 2 != 0) return false;
    return true;
  }

  long long pair(const IntVector& x, const IntVector& y) const {
    long long s = 0;
    for (std::size_t i = 0; i < rank(); ++i) {
      if (x[i] == 0) continue;
      long long row = 0;
      for (std::size_t j = 0; j < rank(); ++j) row = arith::add(row, arith::mul(g_[i][j], y[j]));
      s = arith::add(s, arith::mul(x[i], row));
    }
    return s;
  }
  long long square(const IntVector& x) const { return pair(x, x); }

  // Leading principal minors via fraction-free elimination; stops at a zero pivot.
  std::vector<BigInt> leading_minors() const {
    const std::size_t n = rank();
    std::vector<std::vector<BigInt>> a(n, std::vector<BigInt>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a[i][j] = g_[i][j];
    std::vector<BigInt> out;
    BigInt prev = 1;
    for (std::size_t k = 0; k < n; ++k) {
      out.push_back(a[k][k]);
      if (a[k][k] == 0) break;
      for (std::size_t i = k + 1; i < n; ++i)
        for (std::size_t j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
      prev = a[k][k];
    }
    return out;
  }

  BigInt determinant() const {
    const std::size_t n = rank();
    if (n == 0) return 1;
    std::vector<std::vector<BigInt>> a(n, std::vector<BigInt>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a[i][j] = g_[i][j];
    BigInt prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (a[k][k] == 0) {
        std::size_t p = k + 1;
        while (p < n && a[p][k] == 0) ++p;
        if (p == n) return 0;
        std::swap(a[k], a[p]);
        sign = -sign;
      }
      for (std::size_t i = k + 1; i < n; ++i)
        for (std::size_t j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
      prev = a[k][k];
    }
    return sign * a[n - 1][n - 1];
  }

  bool unimodular() const {
    BigInt d = determinant();
    return d == 1 || d == -1;
  }

  // Sylvester: (-1)^k D_k > 0 for every leading minor.
  bool negative_definite() const {
    auto m = leading_minors();
    if (m.size() != rank()) return false;
    for (std::size_t k = 0; k < m.size(); ++k)
      if ((k % 2 == 0 ? -m[k] : m[k]) <= 0) return false;
    return true;
  }

  long long signature() const {
    require(negative_definite(), ErrorCode::InvalidArgument, "signature is only computed for definite forms here");
    return -static_cast<long long>(rank());
  }

  // Connected components of the graph of nonzero off-diagonal entries.
  std::vector<std::vector<std::size_t>> blocks() const {
    const std::size_t n = rank();
    std::vector<int> comp(n, -1);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      std::vector<std::size_t> stack{s}, members;
      comp[s] = static_cast<int>(out.size());
      while (!stack.empty()) {
        auto i = stack.back();
        stack.pop_back();
        members.push_back(i);
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && g_[i][j] != 0 && comp[j] < 0) {
            comp[j] = comp[s];
            stack.push_back(j);
          }
      }
      std::sort(members.begin(), members.end());
      out.push_back(std::move(members));
    }
    return out;
  }

  IntersectionForm restricted(const std::vector<std::size_t>& idx) const {
    std::vector<IntVector> g(idx.size(), IntVector(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) g[i][j] = g_[idx[i]][idx[j]];
    return IntersectionForm(std::move(g));
  }

  bool characteristic(const IntVector& c) const {
    for (std::size_t i = 0; i < rank(); ++i) {
      long long s = 0;
      for (std::size_t j = 0; j < rank(); ++j) s += (g_[i][j] & 1) * (c[j] & 1);
      if (((s - g_[i][i]) & 1) != 0) return false;
    }
    return true;
  }

 private:
  std::vector<IntVector> g_;
};

// Text format: one row of integers per line, '#' comments.
inline IntersectionForm parse_gram(const std::string& text, const std::string& source = "<gram>") {
  std::vector<IntVector> rows;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto s = detail::strip_comment(line);
    if (s.empty()) continue;
    std::string where = source + ":" + std::to_string(lineno);
    IntVector row;
    for (const auto& t : detail::split_ws(s)) row.push_back(detail::parse_int(t, where));
    if (!rows.empty() && row.size() != rows.front().size()) fail(ErrorCode::Parse, where + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::Parse, source + ": empty Gram matrix");
  if (rows.size() != rows.front().size()) fail(ErrorCode::Parse, source + ": Gram matrix is not square");
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (rows[i][j] != rows[j][i]) fail(ErrorCode::Parse, source + ": Gram matrix is not symmetric");
  return IntersectionForm(std::move(rows));
}

inline IntersectionForm load_gram(const std::string& path) { return parse_gram(detail::read_file(path), path); }

inline std::string write_gram(const IntersectionForm& f) {
  std::ostringstream os;
  for (const auto& row : f.gram()) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Characteristic vectors.

struct EnumerationOptions {
  double budget = 2e7;  // candidate vectors
  int workers = 1;
};

// All characteristic c with |c_i| <= bound, lexicographically sorted.
inline std::vector<IntVector> characteristic_vectors(const IntersectionForm& form, int coord_bound,
                                                     const EnumerationOptions& opt = {}) {
  require(coord_bound >= 1, ErrorCode::InvalidArgument, "coord_bound must be at least 1");
  const std::size_t n = form.rank();
  if (n == 0) return {IntVector{}};
  const double side = 2.0 * coord_bound + 1.0;
  const double total = std::pow(side, static_cast<double>(n));
  if (total > opt.budget) {
    std::ostringstream os;
    os << side << "^" << n << " candidates exceed the budget of " << opt.budget;
    fail(ErrorCode::SearchSpaceTooLarge, os.str());
  }
  const int values = 2 * coord_bound + 1;
  std::vector<std::vector<IntVector>> per_lead(values);
  auto work = [&](int lead_index) {
    IntVector c(n, -coord_bound);
    c[0] = -coord_bound + lead_index;
    auto& out = per_lead[lead_index];
    while (true) {
      if (form.characteristic(c)) out.push_back(c);
      bool done = true;
      for (std::size_t k = n - 1; k >= 1; --k) {
        if (c[k] < coord_bound) {
          ++c[k];
          done = false;
          break;
        }
        c[k] = -coord_bound;
      }
      if (done) break;
    }
  };
  const int w = std::max(1, std::min(opt.workers, values));
  if (w == 1) {
    for (int v = 0; v < values; ++v) work(v);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t)
      pool.emplace_back([&, t] {
        for (int v = t; v < values; v += w) work(v);
      });
    for (auto& th : pool) th.join();
  }
  std::vector<IntVector> all;
  for (auto& v : per_lead)
    for (auto& c : v) all.push_back(std::move(c));
  return all;
}

// ---------------------------------------------------------------------------
// Bound (b2 + c^2) / 8 <= s over characteristic c.

struct BlockBound {
  std::vector<std::size_t> indices;
  std::string kind;  // "odd-1x1", "even", "searched"
  long long max_c_sq = 0;
  bool certified = false;
};

struct FroyshovReport {
  Rational max_value{0};
  Rational s{0};
  long long c_sq = 0;
  IntVector witness;
  std::vector<BlockBound> blocks;
  bool pass = false;
  bool certified = false;
  bool equality = false;
};

inline FroyshovReport froyshov_check(const IntersectionForm& form, Rational s, int coord_bound = 2,
                                     const EnumerationOptions& opt = {}) {
  require(form.negative_definite(), ErrorCode::InvalidArgument, "the form is not negative definite");
  FroyshovReport r;
  r.s = s;
  r.witness.assign(form.rank(), 0);
  r.certified = true;
  for (const auto& idx : form.blocks()) {
    BlockBound b;
    b.indices = idx;
    if (idx.size() == 1) {
      long long a = form.at(idx[0], idx[0]);
      b.kind = "odd-1x1";
      if (a % 2 != 0) {
        b.max_c_sq = a;
        r.witness[idx[0]] = 1;
      } else {
        b.kind = "even";
        b.max_c_sq = 0;
      }
      b.certified = true;
    } else {
      auto sub = form.restricted(idx);
      if (sub.even()) {
        b.kind = "even";
        b.max_c_sq = 0;  // 0 is characteristic and c^2 <= 0
        b.certified = true;
      } else {
        b.kind = "searched";
        auto cs = characteristic_vectors(sub, coord_bound, opt);
        require(!cs.empty(), ErrorCode::SearchSpaceTooLarge, "no characteristic vector within the bound");
        long long best = sub.square(cs.front());
        const IntVector* arg = &cs.front();
        for (const auto& c : cs) {
          long long q = sub.square(c);
          if (q > best) {
            best = q;
            arg = &c;
          }
        }
        b.max_c_sq = best;
        for (std::size_t k = 0; k < idx.size(); ++k) r.witness[idx[k]] = (*arg)[k];
        b.certified = false;
      }
    }
    r.c_sq += b.max_c_sq;
    r.certified = r.certified && b.certified;
    r.blocks.push_back(std::move(b));
  }
  require(form.characteristic(r.witness), ErrorCode::Internal, "witness is not characteristic");
  r.max_value = Rational(static_cast<long long>(form.rank()) + r.c_sq, 8);
  r.pass = r.max_value <= s;
  r.equality = r.max_value == s;
  return r;
}

// Right side of the bound: -n + min{r | gamma_r = 0}.
inline Rational s_upper_bound(Rational n, int r_min) {
  require(r_min >= 0, ErrorCode::InvalidArgument, "r_min must be nonnegative");
  return -n + Rational(r_min);
}

inline Rational relative_degree(long long c_sq, long long sigma) { return Rational(c_sq - sigma, 8); }

// ---------------------------------------------------------------------------
// |(1 - q)^-d (1 - q^-1)^-d| as q -> 1 on the unit circle.

enum class LimitKind { Zero, One, Divergent, Undetermined };

inline const char* to_string(LimitKind k) {
  switch (k) {
    case LimitKind::Zero: return "convergent-to-0";
    case LimitKind::One: return "convergent-to-1";
    case LimitKind::Divergent: return "divergent";
    case LimitKind::Undetermined: return "undetermined";
  }
  return "?";
}

struct TomDieckReport {
  int d = 0;
  std::vector<double> values;
  LimitKind kind = LimitKind::Undetermined;
  bool matches_sign = false;  // d < 0 -> 0, d = 0 -> 1, d > 0 -> divergent
};

inline std::vector<std::complex<double>> default_q_samples(int count = 40) {
  std::vector<std::complex<double>> q;
  for (int k = 1; k <= count; ++k) q.push_back(std::polar(1.0, std::ldexp(1.0, -k)));
  return q;
}

inline TomDieckReport tom_dieck_limit(int d, const std::vector<std::complex<double>>& q_samples,
                                      double threshold = 1e12) {
  require(!q_samples.empty(), ErrorCode::InvalidArgument, "need q samples");
  TomDieckReport r;
  r.d = d;
  for (auto q : q_samples) {
    require(std::abs(std::abs(q) - 1.0) < 1e-9, ErrorCode::InvalidArgument, "q must have unit modulus");
    require(q != std::complex<double>(1.0, 0.0), ErrorCode::InvalidArgument, "q must differ from 1");
    auto a = std::pow(1.0 - q, -d) * std::pow(1.0 - 1.0 / q, -d);
    r.values.push_back(std::abs(a));
  }
  double mx = *std::max_element(r.values.begin(), r.values.end());
  double last = r.values.back();
  if (!(mx <= threshold))
    r.kind = LimitKind::Divergent;
  else if (last < 1.0 / threshold)
    r.kind = LimitKind::Zero;
  else if (std::abs(last - 1.0) < 1e-9)
    r.kind = LimitKind::One;
  LimitKind expect = d < 0 ? LimitKind::Zero : (d == 0 ? LimitKind::One : LimitKind::Divergent);
  r.matches_sign = r.kind == expect;
  return r;
}

inline std::string froyshov_csv(const FroyshovReport& r) {
  std::ostringstream os;
  os << "quantity,value\n";
  os << "max_value," << format_rational(r.max_value) << "\n";
  os << "s," << format_rational(r.s) << "\n";
  os << "c_sq," << r.c_sq << "\n";
  os << "witness,";
  for (std::size_t i = 0; i < r.witness.size(); ++i) os << (i ? ";" : "") << r.witness[i];
  os << "\n";
  os << "pass," << (r.pass ? "true" : "false") << "\n";
  os << "equality," << (r.equality ? "true" : "false") << "\n";
  os << "certified," << (r.certified ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace swfc
