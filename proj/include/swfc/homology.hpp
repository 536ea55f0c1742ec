#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "swfc/cubical.hpp"
#include "swfc/error.hpp"
#include "swfc/snf.hpp"

namespace swfc {

using Rational = boost::rational<long long>;

inline std::string format_rational(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline Rational parse_rational(const std::string& s) {
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(std::stoll(s));
    long long p = std::stoll(s.substr(0, slash));
    long long q = std::stoll(s.substr(slash + 1));
    if (q == 0) fail(ErrorCode::Parse, "zero denominator in '" + s + "'");
    return Rational(p, q);
  } catch (const std::logic_error&) {
    fail(ErrorCode::Parse, "bad rational '" + s + "'");
  }
}

// Invariant-factor form of a finite abelian group given by cyclic orders.
inline std::vector<long long> invariant_factors(const std::vector<long long>& orders) {
  std::map<long long, std::vector<long long>> powers;
  for (long long n : orders) {
    require(n >= 1, ErrorCode::InvalidArgument, "cyclic order must be positive");
    for (long long p = 2; p * p <= n; ++p) {
      if (n % p) continue;
      long long q = 1;
      while (n % p == 0) {
        n /= p;
        q *= p;
      }
      powers[p].push_back(q);
    }
    if (n > 1) powers[n].push_back(n);
  }
  std::size_t len = 0;
  for (auto& [p, v] : powers) {
    std::sort(v.rbegin(), v.rend());
    len = std::max(len, v.size());
  }
  std::vector<long long> out(len, 1);
  for (auto& [p, v] : powers)
    for (std::size_t k = 0; k < v.size(); ++k) out[k] *= v[k];
  std::sort(out.begin(), out.end());
  return out;
}

struct DegreeGroup {
  long long rank = 0;
  std::vector<long long> torsion;  // invariant factors > 1, ascending, each dividing the next
  bool zero() const { return rank == 0 && torsion.empty(); }
  bool operator==(const DegreeGroup&) const = default;
};

class GradedGroup {
 public:
  GradedGroup() = default;

  static GradedGroup sphere(int k, long long rank = 1) {
    GradedGroup g;
    g.set(k, {rank, {}});
    return g;
  }

  void set(int degree, DegreeGroup grp) {
    grp.torsion = invariant_factors(grp.torsion);
    if (grp.zero())
      groups_.erase(degree);
    else
      groups_[degree] = std::move(grp);
  }

  DegreeGroup at(int degree) const {
    auto it = groups_.find(degree);
    return it == groups_.end() ? DegreeGroup{} : it->second;
  }
  long long rank(int degree) const { return at(degree).rank; }
  std::vector<long long> torsion(int degree) const { return at(degree).torsion; }

  const std::map<int, DegreeGroup>& groups() const { return groups_; }
  bool zero() const { return groups_.empty(); }
  int min_degree() const { return groups_.empty() ? 0 : groups_.begin()->first; }
  int max_degree() const { return groups_.empty() ? -1 : groups_.rbegin()->first; }

  const Rational& offset() const { return offset_; }
  void set_offset(Rational r) { offset_ = r; }

  long long euler_characteristic() const {
    long long chi = 0;
    for (auto& [d, g] : groups_) chi += (d % 2 == 0 ? 1 : -1) * g.rank;
    return chi;
  }

  long long total_rank() const {
    long long s = 0;
    for (auto& [d, g] : groups_) s += g.rank;
    return s;
  }

  bool torsion_free() const {
    for (auto& [d, g] : groups_)
      if (!g.torsion.empty()) return false;
    return true;
  }

  // Rank one in degree k and nothing else.
  bool is_sphere(int k) const {
    return groups_.size() == 1 && groups_.begin()->first == k && groups_.begin()->second == DegreeGroup{1, {}};
  }

  // Degrees lowered by `down`, offset lowered by `offset_down`.
  GradedGroup shifted(int down, Rational offset_down) const {
    GradedGroup g;
    for (auto& [d, grp] : groups_) g.groups_[d - down] = grp;
    g.offset_ = offset_ - offset_down;
    return g;
  }

  GradedGroup truncated(int max_degree) const {
    GradedGroup g;
    g.offset_ = offset_;
    for (auto& [d, grp] : groups_)
      if (d <= max_degree) g.groups_[d] = grp;
    return g;
  }

  bool operator==(const GradedGroup& o) const { return groups_ == o.groups_ && offset_ == o.offset_; }

  std::string csv() const {
    std::ostringstream os;
    os << "degree,rank,torsion,offset\n";
    for (auto& [d, g] : groups_) {
      os << d << "," << g.rank << ",";
      for (std::size_t i = 0; i < g.torsion.size(); ++i) os << (i ? ";" : "") << g.torsion[i];
      os << "," << format_rational(offset_) << "\n";
    }
    return os.str();
  }

  std::string table() const {
    std::ostringstream os;
    os << "degree  rank  torsion\n";
    if (groups_.empty()) os << "   (zero group)\n";
    for (auto& [d, g] : groups_) {
      std::string t;
      for (std::size_t i = 0; i < g.torsion.size(); ++i) t += (i ? " + Z/" : "Z/") + std::to_string(g.torsion[i]);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%6d  %4lld  ", d, g.rank);
      os << buf << (t.empty() ? "-" : t) << "\n";
    }
    os << "offset " << format_rational(offset_) << "\n";
    return os.str();
  }

  std::string describe() const {
    if (groups_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto& [d, g] : groups_) {
      os << (first ? "" : ", ") << "H" << d << "=";
      first = false;
      bool any = false;
      if (g.rank) {
        os << "Z" << (g.rank > 1 ? "^" + std::to_string(g.rank) : "");
        any = true;
      }
      for (auto t : g.torsion) {
        os << (any ? "+" : "") << "Z/" << t;
        any = true;
      }
    }
    return os.str();
  }

 private:
  std::map<int, DegreeGroup> groups_;
  Rational offset_{0};
};

inline GradedGroup parse_homology_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "degree,rank,torsion,offset")
    fail(ErrorCode::Parse, "homology CSV header missing");
  GradedGroup g;
  bool have_offset = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    if (f.size() != 4) fail(ErrorCode::Parse, "homology CSV row needs four fields: " + line);
    DegreeGroup grp;
    int deg = static_cast<int>(detail::parse_int(f[0], "homology csv"));
    grp.rank = detail::parse_int(f[1], "homology csv");
    std::size_t s = 0;
    while (s < f[2].size()) {
      auto e = f[2].find(';', s);
      if (e == std::string::npos) e = f[2].size();
      grp.torsion.push_back(detail::parse_int(f[2].substr(s, e - s), "homology csv"));
      s = e + 1;
    }
    g.set(deg, grp);
    Rational off = parse_rational(f[3]);
    if (have_offset && off != g.offset()) fail(ErrorCode::Parse, "inconsistent offsets in homology CSV");
    g.set_offset(off);
    have_offset = true;
  }
  return g;
}

// Graded tensor product with Tor terms (homology of a product of pairs).
inline GradedGroup tensor_product(const GradedGroup& a, const GradedGroup& b) {
  std::map<int, DegreeGroup> acc;
  for (auto& [i, x] : a.groups())
    for (auto& [j, y] : b.groups()) {
      auto& t = acc[i + j];
      t.rank += x.rank * y.rank;
      for (int r = 0; r < y.rank; ++r)
        for (auto v : x.torsion) t.torsion.push_back(v);
      for (int r = 0; r < x.rank; ++r)
        for (auto v : y.torsion) t.torsion.push_back(v);
      for (auto u : x.torsion)
        for (auto v : y.torsion) {
          long long g = std::gcd(u, v);
          if (g > 1) {
            t.torsion.push_back(g);
            acc[i + j + 1].torsion.push_back(g);
          }
        }
    }
  GradedGroup out;
  for (auto& [d, g] : acc) out.set(d, g);
  out.set_offset(a.offset() + b.offset());
  return out;
}

enum class Coefficients { Integers, Z2 };

// ---------------------------------------------------------------------------
// Cubical chain complexes on a grid frame, reduced by elementary collapses.

namespace detail {

// Dense matrices over GF(p) for rank bookkeeping in exact sequences.
struct ModP {
  static constexpr std::uint64_t p = 2147483647ULL;
  static std::uint64_t mul(std::uint64_t a, std::uint64_t b) { return a * b % p; }
  static std::uint64_t inv(std::uint64_t a) {
    std::uint64_t r = 1, e = p - 2;
    while (e) {
      if (e & 1) r = mul(r, a);
      a = mul(a, a);
      e >>= 1;
    }
    return r;
  }
  static std::uint64_t norm(long long v) {
    long long m = v % static_cast<long long>(p);
    return static_cast<std::uint64_t>(m < 0 ? m + static_cast<long long>(p) : m);
  }
};

using ModVec = std::vector<std::uint64_t>;

// Row-reduces a set of column vectors (all of length n); returns the rank.
inline std::size_t mod_rank(std::vector<ModVec> cols, std::size_t n) {
  std::size_t rank = 0;
  std::vector<ModVec> basis;  // echelon, pivot at pivots[k]
  std::vector<std::size_t> pivots;
  for (auto& v : cols) {
    for (std::size_t k = 0; k < basis.size(); ++k) {
      std::uint64_t f = v[pivots[k]];
      if (!f) continue;
      for (std::size_t i = 0; i < n; ++i)
        if (basis[k][i]) v[i] = (v[i] + ModP::p - ModP::mul(f, basis[k][i])) % ModP::p;
    }
    std::size_t piv = n;
    for (std::size_t i = 0; i < n; ++i)
      if (v[i]) {
        piv = i;
        break;
      }
    if (piv == n) continue;
    std::uint64_t s = ModP::inv(v[piv]);
    for (auto& x : v) x = ModP::mul(x, s);
    basis.push_back(std::move(v));
    pivots.push_back(piv);
    ++rank;
  }
  return rank;
}

// Kernel basis of the matrix whose columns are `cols` (length n each).
inline std::vector<ModVec> mod_kernel(const std::vector<ModVec>& cols, std::size_t n) {
  const std::size_t c = cols.size();
  // Augment each column with the unit vector tracking its combination.
  std::vector<ModVec> work(c);
  for (std::size_t j = 0; j < c; ++j) {
    work[j] = cols[j];
    work[j].resize(n + c, 0);
    work[j][n + j] = 1;
  }
  std::vector<std::size_t> pivots;
  std::vector<std::size_t> pivot_col;
  std::vector<ModVec> out;
  for (std::size_t j = 0; j < c; ++j) {
    auto& v = work[j];
    for (std::size_t k = 0; k < pivots.size(); ++k) {
      std::uint64_t f = v[pivots[k]];
      if (!f) continue;
      const auto& b = work[pivot_col[k]];
      for (std::size_t i = 0; i < n + c; ++i)
        if (b[i]) v[i] = (v[i] + ModP::p - ModP::mul(f, b[i])) % ModP::p;
    }
    std::size_t piv = n;
    for (std::size_t i = 0; i < n; ++i)
      if (v[i]) {
        piv = i;
        break;
      }
    if (piv == n) {
      out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(n), v.end());
      continue;
    }
    std::uint64_t s = ModP::inv(v[piv]);
    for (auto& x : v) x = ModP::mul(x, s);
    pivots.push_back(piv);
    pivot_col.push_back(j);
  }
  return out;
}

}  // namespace detail

// Filtration N1 >= N2 >= N3 of cubical sets. The live cells are those of
// cl(N1) not in cl(N3); the sub stratum is cl(N2) minus cl(N3).
class FilteredComplex {
 public:
  enum Stratum : std::uint8_t { Sub = 0, Quot = 1 };

  struct Cell {
    std::int64_t id;
    int dim;
    Stratum stratum;
  };

  FilteredComplex(const CubicalSet& N1, const CubicalSet& N2, const CubicalSet& N3) {
    require(N2.subset_of(N1) && N3.subset_of(N2), ErrorCode::InvalidArgument, "sets must be nested N3 <= N2 <= N1");
    const GridFrame& f = N1.frame();
    d_ = f.dim();
    if (N1.empty()) return;
    lo_.assign(d_, std::numeric_limits<int>::max());
    std::vector<int> hi(d_, std::numeric_limits<int>::min()), m(d_);
    for (auto c : N1) {
      f.multi(c, m.data());
      for (std::size_t k = 0; k < d_; ++k) {
        lo_[k] = std::min(lo_[k], m[k]);
        hi[k] = std::max(hi[k], m[k]);
      }
    }
    width_.resize(d_);
    stride_.resize(d_);
    std::int64_t s = 1;
    for (std::size_t k = d_; k-- > 0;) {
      width_[k] = 2 * (hi[k] - lo_[k] + 1) + 1;
      stride_[k] = s;
      s *= width_[k];
    }
    flags_.assign(static_cast<std::size_t>(s), 0);
    mark(N1, 1);
    mark(N2, 2);
    mark(N3, 4);
    reduce();
    collect();
  }

  std::size_t dim() const { return d_; }
  const std::vector<Cell>& cells() const { return cells_; }

  // Z-homology or Z2-homology of the full, sub or quotient complex.
  GradedGroup homology(int which, Coefficients coeff = Coefficients::Integers) const {
    // which: 0 full (N1, N3), 1 sub (N2, N3), 2 quotient (N1, N2)
    GradedGroup g;
    const int top = static_cast<int>(d_);
    std::vector<long long> count(top + 2, 0), rank(top + 2, 0);
    std::vector<std::vector<long long>> tors(top + 2);
    for (auto& c : cells_)
      if (selected(c, which)) ++count[c.dim];
    for (int k = 1; k <= top; ++k) {
      auto M = boundary(k, which);
      if (M.cols == 0 || M.rows == 0) continue;
      if (coeff == Coefficients::Z2) {
        rank[k] = static_cast<long long>(rank_mod_p(M.rows, M.col, 2));
      } else {
        auto s = sparse_divisors(M);
        rank[k] = static_cast<long long>(s.rank);
        for (auto& v : s.nontrivial) {
          if (v > BigInt(std::numeric_limits<long long>::max())) fail(ErrorCode::Overflow, "torsion coefficient too large");
          tors[k].push_back(static_cast<long long>(v));
        }
      }
    }
    for (int k = 0; k <= top; ++k) {
      DegreeGroup grp;
      grp.rank = count[k] - rank[k] - rank[k + 1];
      grp.torsion = tors[k + 1];
      g.set(k, grp);
    }
    return g;
  }

  // Boundary matrix C_k -> C_{k-1} restricted to the chosen complex.
  SparseIntMatrix boundary(int k, int which) const {
    std::vector<std::int64_t> rows_ids, cols_ids;
    for (auto& c : cells_) {
      if (!selected(c, which)) continue;
      if (c.dim == k) cols_ids.push_back(c.id);
      if (c.dim == k - 1) rows_ids.push_back(c.id);
    }
    SparseIntMatrix M(rows_ids.size(), cols_ids.size());
    for (std::size_t j = 0; j < cols_ids.size(); ++j) {
      for (auto [face, sg] : faces(cols_ids[j])) {
        auto it = std::lower_bound(rows_ids.begin(), rows_ids.end(), face);
        if (it == rows_ids.end() || *it != face) continue;
        M.col[j].push_back({static_cast<std::int32_t>(it - rows_ids.begin()), sg});
      }
      std::sort(M.col[j].begin(), M.col[j].end());
    }
    return M;
  }

  // Signed faces of a cell that are still live.
  std::vector<std::pair<std::int64_t, long long>> faces(std::int64_t id) const {
    std::vector<std::pair<std::int64_t, long long>> out;
    int coord[16];
    decode(id, coord);
    long long sign = 1;
    for (std::size_t k = 0; k < d_; ++k) {
      if (!(coord[k] & 1)) continue;
      std::int64_t up = id + stride_[k], dn = id - stride_[k];
      if (live(up)) out.push_back({up, sign});
      if (live(dn)) out.push_back({dn, -sign});
      sign = -sign;
    }
    return out;
  }

  bool selected(const Cell& c, int which) const {
    return which == 0 || (which == 1 && c.stratum == Sub) || (which == 2 && c.stratum == Quot);
  }

 private:
  void mark(const CubicalSet& X, std::uint8_t bit) {
    const GridFrame& f = X.frame();
    std::vector<int> m(d_);
    const unsigned n3 = [&] {
      unsigned v = 1;
      for (std::size_t k = 0; k < d_; ++k) v *= 3;
      return v;
    }();
    for (auto c : X) {
      f.multi(c, m.data());
      std::int64_t centre = 0;
      for (std::size_t k = 0; k < d_; ++k) centre += (2 * (m[k] - lo_[k]) + 1) * stride_[k];
      for (unsigned q = 0; q < n3; ++q) {
        unsigned r = q;
        std::int64_t id = centre;
        for (std::size_t k = 0; k < d_; ++k) {
          id += (static_cast<int>(r % 3) - 1) * stride_[k];
          r /= 3;
        }
        flags_[id] |= bit;
      }
    }
  }

  void decode(std::int64_t id, int* coord) const {
    for (std::size_t k = 0; k < d_; ++k) {
      coord[k] = static_cast<int>(id / stride_[k]);
      id -= static_cast<std::int64_t>(coord[k]) * stride_[k];
    }
  }

  bool live(std::int64_t id) const {
    std::uint8_t f = flags_[id];
    return (f & 1) && !(f & 4) && !(f & 8);
  }
  std::uint8_t stratum(std::int64_t id) const { return (flags_[id] & 2) ? Sub : Quot; }

  template <class Fn>
  void for_neighbours(std::int64_t id, Fn&& fn) const {
    int coord[16];
    decode(id, coord);
    for (std::size_t k = 0; k < d_; ++k) {
      if (coord[k] & 1) {
        fn(id + stride_[k], true);
        fn(id - stride_[k], true);
      } else {
        if (coord[k] + 1 < width_[k]) fn(id + stride_[k], false);
        if (coord[k] > 0) fn(id - stride_[k], false);
      }
    }
  }

  void reduce() {
    std::vector<std::int64_t> stack;
    const std::int64_t n = static_cast<std::int64_t>(flags_.size());
    for (std::int64_t id = n; id-- > 0;)
      if (live(id)) {
        stack.push_back(id);
        flags_[id] |= 16;
      }
    auto push = [&](std::int64_t id) {
      if (live(id) && !(flags_[id] & 16)) {
        flags_[id] |= 16;
        stack.push_back(id);
      }
    };
    auto remove_pair = [&](std::int64_t a, std::int64_t b) {
      flags_[a] |= 8;
      flags_[b] |= 8;
      for_neighbours(a, [&](std::int64_t q, bool) { push(q); });
      for_neighbours(b, [&](std::int64_t q, bool) { push(q); });
    };
    while (!stack.empty()) {
      std::int64_t x = stack.back();
      stack.pop_back();
      flags_[x] &= static_cast<std::uint8_t>(~16);
      if (!live(x)) continue;
      int nf = 0, nc = 0;
      std::int64_t face = -1, coface = -1;
      for_neighbours(x, [&](std::int64_t q, bool is_face) {
        if (!live(q)) return;
        if (is_face) {
          ++nf;
          face = q;
        } else {
          ++nc;
          coface = q;
        }
      });
      if (nf == 1 && stratum(face) == stratum(x)) {
        remove_pair(x, face);
      } else if (nc == 1 && stratum(coface) == stratum(x)) {
        remove_pair(x, coface);
      }
    }
  }

  void collect() {
    int coord[16];
    for (std::int64_t id = 0; id < static_cast<std::int64_t>(flags_.size()); ++id) {
      if (!live(id)) continue;
      decode(id, coord);
      int dm = 0;
      for (std::size_t k = 0; k < d_; ++k) dm += coord[k] & 1;
      cells_.push_back({id, dm, static_cast<Stratum>(stratum(id))});
    }
  }

  std::size_t d_ = 0;
  std::vector<int> lo_, width_;
  std::vector<std::int64_t> stride_;
  std::vector<std::uint8_t> flags_;  // 1 cl N1, 2 cl N2, 4 cl N3, 8 removed, 16 queued
  std::vector<Cell> cells_;
};

// Homology of the pair (N, L). With L empty this is H(N), the reduced homology of N with a disjoint basepoint.
inline GradedGroup relative_homology(const CubicalSet& N, const CubicalSet& L, int max_degree = -1,
                                     Coefficients coeff = Coefficients::Integers) {
  require(L.subset_of(N), ErrorCode::InvalidArgument, "L must be contained in N");
  FilteredComplex cx(N, L, L);
  GradedGroup g = cx.homology(0, coeff);
  if (max_degree < 0) max_degree = static_cast<int>(N.dim());
  return g.truncated(max_degree);
}

inline GradedGroup cubical_homology(const CubicalSet& N, Coefficients coeff = Coefficients::Integers) {
  return relative_homology(N, CubicalSet(N.frame()), -1, coeff);
}

// Long exact sequence of the triple:
//   H_k(N2,N3) -i-> H_k(N1,N3) -j-> H_k(N1,N2) -d-> H_{k-1}(N2,N3)
struct LesNode {
  std::string group;  // "H_k(N2,N3)" etc.
  int degree = 0;
  long long dim = 0, rank_in = 0, rank_out = 0;
  bool exact() const { return dim == rank_in + rank_out; }
};

struct LesReport {
  GradedGroup h23, h13, h12;
  long long chi23 = 0, chi13 = 0, chi12 = 0;
  std::vector<LesNode> nodes;
  bool euler_ok() const { return chi13 == chi12 + chi23; }
  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    for (auto& n : nodes)
      if (!n.exact())
        v.push_back(n.group + ": dim " + std::to_string(n.dim) + " != " + std::to_string(n.rank_in) + " + " +
                    std::to_string(n.rank_out));
    if (!euler_ok()) v.push_back("Euler characteristics are not additive");
    return v;
  }
  bool exact() const { return violations().empty(); }
};

inline LesReport les_exactness(const CubicalSet& N1, const CubicalSet& N2, const CubicalSet& N3) {
  using detail::ModVec;
  FilteredComplex cx(N1, N2, N3);
  LesReport rep;
  rep.h13 = cx.homology(0);
  rep.h23 = cx.homology(1);
  rep.h12 = cx.homology(2);
  rep.chi13 = rep.h13.euler_characteristic();
  rep.chi23 = rep.h23.euler_characteristic();
  rep.chi12 = rep.h12.euler_characteristic();
  const int top = static_cast<int>(cx.dim());

  // Cells by degree in a fixed order; stratum flags.
  std::vector<std::vector<const FilteredComplex::Cell*>> by_dim(top + 2);
  for (auto& c : cx.cells()) by_dim[c.dim].push_back(&c);
  auto position = [&](int k, std::int64_t id) -> std::size_t {
    auto& v = by_dim[k];
    auto it = std::lower_bound(v.begin(), v.end(), id, [](const FilteredComplex::Cell* c, std::int64_t x) { return c->id < x; });
    return static_cast<std::size_t>(it - v.begin());
  };
  auto in_set = [&](const FilteredComplex::Cell* c, int which) { return cx.selected(*c, which); };
  // Full boundary of cell j in degree k as a vector on degree k-1 cells.
  auto bd = [&](int k, std::size_t j) {
    ModVec v(k >= 1 ? by_dim[k - 1].size() : 0, 0);
    if (k < 1) return v;
    for (auto [face, sg] : cx.faces(by_dim[k][j]->id)) v[position(k - 1, face)] = detail::ModP::norm(sg);
    return v;
  };
  // Boundary columns of the chosen complex in degree k, as full-length vectors on degree k-1.
  auto boundaries = [&](int k, int which) {
    std::vector<ModVec> cols;
    if (k < 1 || k > top) return cols;
    for (std::size_t j = 0; j < by_dim[k].size(); ++j)
      if (in_set(by_dim[k][j], which)) {
        ModVec v = bd(k, j);
        if (which == 2)
          for (std::size_t i = 0; i < v.size(); ++i)
            if (!in_set(by_dim[k - 1][i], 2)) v[i] = 0;
        cols.push_back(std::move(v));
      }
    return cols;
  };
  // Cycles of the chosen complex in degree k, as full-length vectors on degree k cells.
  auto cycles = [&](int k, int which) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < by_dim[k].size(); ++j)
      if (in_set(by_dim[k][j], which)) idx.push_back(j);
    std::vector<ModVec> cols;
    std::size_t n = k >= 1 ? by_dim[k - 1].size() : 0;
    for (auto j : idx) {
      ModVec v = bd(k, j);
      if (which == 2)
        for (std::size_t i = 0; i < v.size(); ++i)
          if (!in_set(by_dim[k - 1][i], 2)) v[i] = 0;
      cols.push_back(std::move(v));
    }
    std::vector<ModVec> out;
    for (auto& kv : detail::mod_kernel(cols, n)) {
      ModVec z(by_dim[k].size(), 0);
      for (std::size_t t = 0; t < idx.size(); ++t) z[idx[t]] = kv[t];
      out.push_back(std::move(z));
    }
    return out;
  };
  auto rank_of = [&](const std::vector<ModVec>& cols, std::size_t n) { return static_cast<long long>(detail::mod_rank(cols, n)); };

  std::vector<long long> ri(top + 2, 0), rj(top + 2, 0), rd(top + 2, 0);
  std::vector<long long> dim23(top + 2, 0), dim13(top + 2, 0), dim12(top + 2, 0);
  for (int k = 0; k <= top; ++k) {
    const std::size_t nk = by_dim[k].size();
    auto Zs = cycles(k, 1), Zf = cycles(k, 0), Zq = cycles(k, 2);
    auto Bs = boundaries(k + 1, 1), Bf = boundaries(k + 1, 0), Bq = boundaries(k + 1, 2);
    long long rBs = rank_of(Bs, nk), rBf = rank_of(Bf, nk), rBq = rank_of(Bq, nk);
    dim23[k] = static_cast<long long>(Zs.size()) - rBs;
    dim13[k] = static_cast<long long>(Zf.size()) - rBf;
    dim12[k] = static_cast<long long>(Zq.size()) - rBq;
    {
      auto M = Zs;
      M.insert(M.end(), Bf.begin(), Bf.end());
      ri[k] = rank_of(M, nk) - rBf;
    }
    {
      std::vector<ModVec> M;
      for (auto& z : Zf) {
        ModVec v = z;
        for (std::size_t i = 0; i < nk; ++i)
          if (!in_set(by_dim[k][i], 2)) v[i] = 0;
        M.push_back(std::move(v));
      }
      M.insert(M.end(), Bq.begin(), Bq.end());
      rj[k] = rank_of(M, nk) - rBq;
    }
    if (k >= 1) {
      const std::size_t nk1 = by_dim[k - 1].size();
      auto Bs1 = boundaries(k, 1);
      long long rBs1 = rank_of(Bs1, nk1);
      std::vector<ModVec> M;
      for (auto& z : Zq) {
        ModVec v(nk1, 0);
        for (std::size_t j = 0; j < nk; ++j) {
          if (!z[j]) continue;
          ModVec b = bd(k, j);
          for (std::size_t i = 0; i < nk1; ++i)
            if (b[i]) v[i] = (v[i] + detail::ModP::mul(z[j], b[i])) % detail::ModP::p;
        }
        M.push_back(std::move(v));
      }
      M.insert(M.end(), Bs1.begin(), Bs1.end());
      rd[k] = rank_of(M, nk1) - rBs1;
    }
  }
  for (int k = 0; k <= top; ++k) {
    long long d_in = k + 1 <= top ? rd[k + 1] : 0;
    rep.nodes.push_back({"H_" + std::to_string(k) + "(N2,N3)", k, dim23[k], d_in, ri[k]});
    rep.nodes.push_back({"H_" + std::to_string(k) + "(N1,N3)", k, dim13[k], ri[k], rj[k]});
    rep.nodes.push_back({"H_" + std::to_string(k) + "(N1,N2)", k, dim12[k], rj[k], rd[k]});
  }
  return rep;
}

}  // namespace swfc
