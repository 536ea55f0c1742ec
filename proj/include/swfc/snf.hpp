#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "swfc/error.hpp"

namespace swfc {

using BigInt = boost::multiprecision::cpp_int;

namespace arith {

inline long long add(long long a, long long b) {
  long long r;
  if (__builtin_add_overflow(a, b, &r)) fail(ErrorCode::Overflow, "int64 overflow");
  return r;
}
inline long long mul(long long a, long long b) {
  long long r;
  if (__builtin_mul_overflow(a, b, &r)) fail(ErrorCode::Overflow, "int64 overflow");
  return r;
}
inline long long sub(long long a, long long b) {
  long long r;
  if (__builtin_sub_overflow(a, b, &r)) fail(ErrorCode::Overflow, "int64 overflow");
  return r;
}
inline BigInt add(const BigInt& a, const BigInt& b) { return a + b; }
inline BigInt mul(const BigInt& a, const BigInt& b) { return a * b; }
inline BigInt sub(const BigInt& a, const BigInt& b) { return a - b; }

template <class T>
T absval(const T& v) {
  return v < 0 ? T(-v) : v;
}

}  // namespace arith

template <class T>
struct DenseMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<T> a;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, T(0)) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  T& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  DenseMatrix operator*(const DenseMatrix& o) const {
    DenseMatrix r(rows, o.cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = 0; k < cols; ++k) {
        if ((*this)(i, k) == 0) continue;
        for (std::size_t j = 0; j < o.cols; ++j)
          r(i, j) = arith::add(r(i, j), arith::mul((*this)(i, k), o(k, j)));
      }
    return r;
  }
  bool operator==(const DenseMatrix& o) const = default;
};

template <class T>
struct SmithResult {
  std::vector<T> divisors;  // nonzero diagonal, d1 | d2 | ...
  DenseMatrix<T> U, V;      // U M V = diag(divisors, 0)
  bool has_transforms = false;
  std::size_t rank() const { return divisors.size(); }
};

namespace detail {

template <class T>
void row_axpy(DenseMatrix<T>& M, std::size_t dst, std::size_t src, const T& q) {
  // row_dst -= q row_src
  for (std::size_t j = 0; j < M.cols; ++j)
    if (M(src, j) != 0) M(dst, j) = arith::sub(M(dst, j), arith::mul(q, M(src, j)));
}
template <class T>
void col_axpy(DenseMatrix<T>& M, std::size_t dst, std::size_t src, const T& q) {
  for (std::size_t i = 0; i < M.rows; ++i)
    if (M(i, src) != 0) M(i, dst) = arith::sub(M(i, dst), arith::mul(q, M(i, src)));
}
template <class T>
void swap_rows(DenseMatrix<T>& M, std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t j = 0; j < M.cols; ++j) std::swap(M(a, j), M(b, j));
}
template <class T>
void swap_cols(DenseMatrix<T>& M, std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t i = 0; i < M.rows; ++i) std::swap(M(i, a), M(i, b));
}
template <class T>
void mix_rows(DenseMatrix<T>& M, std::size_t p, std::size_t q, const T& x, const T& y, const T& u, const T& w) {
  for (std::size_t j = 0; j < M.cols; ++j) {
    T a = M(p, j), b = M(q, j);
    if (a == 0 && b == 0) continue;
    M(p, j) = arith::add(arith::mul(x, a), arith::mul(y, b));
    M(q, j) = arith::add(arith::mul(u, a), arith::mul(w, b));
  }
}
template <class T>
void mix_cols(DenseMatrix<T>& M, std::size_t p, std::size_t q, const T& x, const T& y, const T& u, const T& w) {
  for (std::size_t i = 0; i < M.rows; ++i) {
    T a = M(i, p), b = M(i, q);
    if (a == 0 && b == 0) continue;
    M(i, p) = arith::add(arith::mul(x, a), arith::mul(y, b));
    M(i, q) = arith::add(arith::mul(u, a), arith::mul(w, b));
  }
}
// g = x a + y b with g = gcd(a, b) > 0.
template <class T>
std::tuple<T, T, T> bezout(T a, T b) {
  T x0 = 1, y0 = 0, x1 = 0, y1 = 1;
  while (b != 0) {
    T q = a / b, r = a - q * b;
    a = b;
    b = r;
    T nx = x0 - q * x1, ny = y0 - q * y1;
    x0 = x1;
    y0 = y1;
    x1 = nx;
    y1 = ny;
  }
  if (a < 0) return {T(-a), T(-x0), T(-y0)};
  return {a, x0, y0};
}

}  // namespace detail

namespace detail {

template <class T>
T gcd_of(T a, T b) {
  a = arith::absval(a);
  b = arith::absval(b);
  while (b != 0) {
    T r = a % b;
    a = b;
    b = r;
  }
  return a;
}

// Symmetric residue in (-D/2, D/2].
template <class T>
T mod_sym(const T& a, const T& D) {
  T r = a % D;
  if (r < 0) r += D;
  if (r > D / 2) r -= D;
  return r;
}

// Rank and |det| of a maximal nonsingular minor, by fraction-free elimination with full pivoting.
template <class T>
std::pair<std::size_t, T> bareiss_minor(DenseMatrix<T> M) {
  const std::size_t r = M.rows, c = M.cols;
  T prev = 1;
  std::size_t k = 0;
  for (; k < std::min(r, c); ++k) {
    std::size_t pi = r, pj = c;
    for (std::size_t i = k; i < r && pi == r; ++i)
      for (std::size_t j = k; j < c; ++j)
        if (M(i, j) != 0) {
          pi = i;
          pj = j;
          break;
        }
    if (pi == r) break;
    swap_rows(M, k, pi);
    swap_cols(M, k, pj);
    for (std::size_t i = k + 1; i < r; ++i) {
      for (std::size_t j = k + 1; j < c; ++j)
        M(i, j) = arith::sub(arith::mul(M(i, j), M(k, k)), arith::mul(M(i, k), M(k, j))) / prev;
      M(i, k) = 0;
    }
    prev = M(k, k);
  }
  return {k, arith::absval(prev)};
}

// Divisors of a matrix without unit entries: elimination modulo D, a nonzero
// maximal minor. Over Z/D the invariant factors are gcd(d_i, D) = d_i.
template <class T>
std::vector<T> modular_divisors(DenseMatrix<T> M) {
  using arith::absval;
  auto [rank, D] = bareiss_minor(M);
  std::vector<T> out;
  if (rank == 0) return out;
  const std::size_t r = M.rows, c = M.cols;
  for (auto& v : M.a) v = mod_sym(v, D);
  auto row_axpy_mod = [&](std::size_t dst, std::size_t src, const T& q) {
    for (std::size_t j = 0; j < c; ++j)
      if (M(src, j) != 0) M(dst, j) = mod_sym(arith::sub(M(dst, j), arith::mul(mod_sym(q, D), M(src, j))), D);
  };
  auto col_axpy_mod = [&](std::size_t dst, std::size_t src, const T& q) {
    for (std::size_t i = 0; i < r; ++i)
      if (M(i, src) != 0) M(i, dst) = mod_sym(arith::sub(M(i, dst), arith::mul(mod_sym(q, D), M(i, src))), D);
  };
  for (std::size_t t = 0; t < std::min(r, c); ++t) {
    bool found = false;
    std::size_t pi = 0, pj = 0;
    T best = 0;
    for (std::size_t i = t; i < r; ++i)
      for (std::size_t j = t; j < c; ++j)
        if (M(i, j) != 0 && (!found || absval(M(i, j)) < best)) {
          found = true;
          best = absval(M(i, j));
          pi = i;
          pj = j;
        }
    if (!found) break;
    swap_rows(M, t, pi);
    swap_cols(M, t, pj);
    while (true) {
      bool clean = true;
      for (std::size_t i = t + 1; i < r; ++i) {
        if (M(i, t) == 0) continue;
        row_axpy_mod(i, t, M(i, t) / M(t, t));
        if (M(i, t) != 0) {
          clean = false;
          if (absval(M(i, t)) < absval(M(t, t))) swap_rows(M, t, i);
        }
      }
      for (std::size_t j = t + 1; j < c; ++j) {
        if (M(t, j) == 0) continue;
        col_axpy_mod(j, t, M(t, j) / M(t, t));
        if (M(t, j) != 0) {
          clean = false;
          if (absval(M(t, j)) < absval(M(t, t))) swap_cols(M, t, j);
        }
      }
      if (!clean) continue;
      // The virtual column D e_t turns the pivot into gcd(pivot, D).
      M(t, t) = gcd_of(M(t, t), D);
      bool divisible = true;
      for (std::size_t i = t + 1; i < r && divisible; ++i)
        for (std::size_t j = t + 1; j < c; ++j)
          if (M(i, j) % M(t, t) != 0) {
            row_axpy_mod(t, i, T(-1));
            divisible = false;
            break;
          }
      if (divisible) break;
    }
    out.push_back(M(t, t));
  }
  while (out.size() < rank) out.push_back(D);
  out.resize(rank);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Without transforms: exact elimination on unit pivots, then the modular
// method on what is left. With transforms the Euclidean algorithm runs on the
// whole matrix and its entries can grow quickly.
template <class T>
SmithResult<T> smith_normal_form(DenseMatrix<T> M, bool transforms = true) {
  if (!transforms) {
    using arith::absval;
    SmithResult<T> res;
    const std::size_t r = M.rows, c = M.cols;
    std::size_t t = 0;
    for (; t < std::min(r, c); ++t) {
      std::size_t pi = r, pj = c;
      for (std::size_t i = t; i < r && pi == r; ++i)
        for (std::size_t j = t; j < c; ++j)
          if (absval(M(i, j)) == 1) {
            pi = i;
            pj = j;
            break;
          }
      if (pi == r) break;
      detail::swap_rows(M, t, pi);
      detail::swap_cols(M, t, pj);
      const T p = M(t, t);
      for (std::size_t i = t + 1; i < r; ++i)
        if (M(i, t) != 0) {
          T q = arith::mul(M(i, t), p);
          for (std::size_t j = t + 1; j < c; ++j)
            if (M(t, j) != 0) M(i, j) = arith::sub(M(i, j), arith::mul(q, M(t, j)));
          M(i, t) = 0;
        }
      res.divisors.push_back(T(1));
    }
    if (t < r && t < c) {
      DenseMatrix<T> B(r - t, c - t);
      for (std::size_t i = t; i < r; ++i)
        for (std::size_t j = t; j < c; ++j) B(i - t, j - t) = M(i, j);
      for (auto& d : detail::modular_divisors(std::move(B))) res.divisors.push_back(d);
    }
    return res;
  }
  using arith::absval;
  SmithResult<T> res;
  const std::size_t r = M.rows, c = M.cols;
  DenseMatrix<T> U, V;
  if (transforms) {
    U = DenseMatrix<T>::identity(r);
    V = DenseMatrix<T>::identity(c);
  }
  // Row ops act on U from the left, column ops on V from the right.
  auto rop_axpy = [&](std::size_t dst, std::size_t src, const T& q) {
    detail::row_axpy(M, dst, src, q);
    if (transforms) detail::row_axpy(U, dst, src, q);
  };
  auto cop_axpy = [&](std::size_t dst, std::size_t src, const T& q) {
    detail::col_axpy(M, dst, src, q);
    if (transforms) detail::col_axpy(V, dst, src, q);
  };
  auto rswap = [&](std::size_t a, std::size_t b) {
    detail::swap_rows(M, a, b);
    if (transforms) detail::swap_rows(U, a, b);
  };
  auto cswap = [&](std::size_t a, std::size_t b) {
    detail::swap_cols(M, a, b);
    if (transforms) detail::swap_cols(V, a, b);
  };
  // (row_p, row_q) <- (x row_p + y row_q, u row_p + w row_q), determinant 1.
  auto rop_mix = [&](std::size_t p, std::size_t q, const T& x, const T& y, const T& u, const T& w) {
    detail::mix_rows(M, p, q, x, y, u, w);
    if (transforms) detail::mix_rows(U, p, q, x, y, u, w);
  };
  auto cop_mix = [&](std::size_t p, std::size_t q, const T& x, const T& y, const T& u, const T& w) {
    detail::mix_cols(M, p, q, x, y, u, w);
    if (transforms) detail::mix_cols(V, p, q, x, y, u, w);
  };

  std::size_t t = 0;
  for (; t < std::min(r, c); ++t) {
    // Smallest nonzero entry of the trailing block.
    bool found = false;
    std::size_t pi = 0, pj = 0;
    T best = 0;
    for (std::size_t i = t; i < r; ++i)
      for (std::size_t j = t; j < c; ++j)
        if (M(i, j) != 0 && (!found || absval(M(i, j)) < best)) {
          found = true;
          best = absval(M(i, j));
          pi = i;
          pj = j;
        }
    if (!found) break;
    rswap(t, pi);
    cswap(t, pj);
    while (true) {
      bool clean = true;
      for (std::size_t i = t + 1; i < r; ++i) {
        if (M(i, t) == 0) continue;
        if (M(i, t) % M(t, t) == 0) {
          rop_axpy(i, t, M(i, t) / M(t, t));
          continue;
        }
        auto [g, x, y] = detail::bezout(M(t, t), M(i, t));
        T a = M(t, t) / g, b = M(i, t) / g;
        rop_mix(t, i, x, y, -b, a);
        clean = false;
      }
      for (std::size_t j = t + 1; j < c; ++j) {
        if (M(t, j) == 0) continue;
        if (M(t, j) % M(t, t) == 0) {
          cop_axpy(j, t, M(t, j) / M(t, t));
          continue;
        }
        auto [g, x, y] = detail::bezout(M(t, t), M(t, j));
        T a = M(t, t) / g, b = M(t, j) / g;
        cop_mix(t, j, x, y, -b, a);
        clean = false;
      }
      if (!clean) continue;
      // Divisibility: fold an offending row into row t.
      bool divisible = true;
      for (std::size_t i = t + 1; i < r && divisible; ++i)
        for (std::size_t j = t + 1; j < c; ++j)
          if (M(i, j) % M(t, t) != 0) {
            rop_axpy(t, i, T(-1));
            divisible = false;
            break;
          }
      if (divisible) break;
    }
    if (M(t, t) < 0) {
      for (std::size_t j = 0; j < c; ++j) M(t, j) = -M(t, j);
      if (transforms)
        for (std::size_t j = 0; j < r; ++j) U(t, j) = -U(t, j);
    }
    res.divisors.push_back(M(t, t));
  }
  if (transforms) {
    res.U = std::move(U);
    res.V = std::move(V);
    res.has_transforms = true;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Sparse integer matrices: eliminate unit pivots first, then run the dense
// algorithm on what is left. Only the divisors are produced.

struct SparseIntMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::vector<std::pair<std::int32_t, long long>>> col;  // sorted by row

  SparseIntMatrix() = default;
  SparseIntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), col(c) {}
};

template <class T>
std::vector<T> sparse_divisors_impl(const SparseIntMatrix& in) {
  using Entry = std::pair<std::int32_t, T>;
  const std::size_t R = in.rows, C = in.cols;
  std::vector<std::vector<Entry>> col(C);
  std::vector<std::vector<std::int32_t>> row_cols(R);
  for (std::size_t j = 0; j < C; ++j) {
    for (auto& [i, v] : in.col[j])
      if (v != 0) {
        col[j].push_back({i, T(v)});
        row_cols[i].push_back(static_cast<std::int32_t>(j));
      }
  }
  std::vector<char> row_alive(R, 1), col_alive(C, 1);
  std::size_t units = 0;
  std::vector<Entry> merged;

  auto entry_of = [&](std::size_t j, std::int32_t i) -> T {
    auto& cv = col[j];
    auto it = std::lower_bound(cv.begin(), cv.end(), i, [](const Entry& e, std::int32_t k) { return e.first < k; });
    return (it != cv.end() && it->first == i) ? it->second : T(0);
  };

  bool progress = true;
  while (progress) {
    progress = false;
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < C; ++j)
      if (col_alive[j] && !col[j].empty()) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return col[a].size() != col[b].size() ? col[a].size() < col[b].size() : a < b;
    });
    for (std::size_t j : order) {
      if (!col_alive[j]) continue;
      // Unit entry in this column with the sparsest row.
      std::int32_t pr = -1;
      std::size_t best = 0;
      T pv = 0;
      for (auto& [i, v] : col[j]) {
        if (!row_alive[i]) continue;
        if (v == 1 || v == -1) {
          std::size_t rn = row_cols[i].size();
          if (pr < 0 || rn < best) {
            pr = i;
            best = rn;
            pv = v;
          }
        }
      }
      if (pr < 0) continue;
      // Clear row pr in the other columns using column j.
      for (std::int32_t jj : row_cols[pr]) {
        if (static_cast<std::size_t>(jj) == j || !col_alive[jj]) continue;
        T a = entry_of(jj, pr);
        if (a == 0) continue;
        T q = arith::mul(a, pv);  // pv = +-1, so a / pv = a * pv
        merged.clear();
        auto& x = col[jj];
        auto& y = col[j];
        std::size_t p = 0, s = 0;
        while (p < x.size() || s < y.size()) {
          if (s >= y.size() || (p < x.size() && x[p].first < y[s].first)) {
            merged.push_back(x[p++]);
          } else if (p >= x.size() || y[s].first < x[p].first) {
            if (row_alive[y[s].first]) {
              merged.push_back({y[s].first, arith::mul(T(-1), arith::mul(q, y[s].second))});
              row_cols[y[s].first].push_back(jj);
            }
            ++s;
          } else {
            T v = arith::sub(x[p].second, arith::mul(q, y[s].second));
            if (v != 0) merged.push_back({x[p].first, v});
            ++p;
            ++s;
          }
        }
        x.swap(merged);
      }
      row_alive[pr] = 0;
      col_alive[j] = 0;
      ++units;
      progress = true;
    }
    // Drop dead rows from live columns and deduplicate row lists.
    for (std::size_t j = 0; j < C; ++j) {
      if (!col_alive[j]) continue;
      auto& cv = col[j];
      cv.erase(std::remove_if(cv.begin(), cv.end(), [&](const Entry& e) { return !row_alive[e.first] || e.second == 0; }),
               cv.end());
    }
    for (std::size_t i = 0; i < R; ++i) {
      if (!row_alive[i]) {
        row_cols[i].clear();
        continue;
      }
      auto& rc = row_cols[i];
      std::sort(rc.begin(), rc.end());
      rc.erase(std::unique(rc.begin(), rc.end()), rc.end());
      rc.erase(std::remove_if(rc.begin(), rc.end(), [&](std::int32_t jj) { return !col_alive[jj] || entry_of(jj, static_cast<std::int32_t>(i)) == 0; }),
               rc.end());
    }
  }
  // Dense remainder.
  std::vector<std::int32_t> rmap(R, -1);
  std::size_t nr = 0, nc = 0;
  for (std::size_t j = 0; j < C; ++j)
    if (col_alive[j])
      for (auto& e : col[j])
        if (rmap[e.first] < 0) rmap[e.first] = static_cast<std::int32_t>(nr++);
  std::vector<std::size_t> cols_left;
  for (std::size_t j = 0; j < C; ++j)
    if (col_alive[j] && !col[j].empty()) cols_left.push_back(j);
  nc = cols_left.size();
  std::vector<T> out(units, T(1));
  if (nr > 0 && nc > 0) {
    DenseMatrix<T> D(nr, nc);
    for (std::size_t k = 0; k < nc; ++k)
      for (auto& e : col[cols_left[k]]) D(rmap[e.first], k) = e.second;
    auto sr = smith_normal_form(std::move(D), false);
    for (auto& v : sr.divisors) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Elementary divisors as a rank and the nontrivial list; retries in big integers on overflow.
struct DivisorSummary {
  std::size_t rank = 0;
  std::vector<BigInt> nontrivial;  // > 1, sorted, dividing chain
};

inline DivisorSummary sparse_divisors(const SparseIntMatrix& M) {
  DivisorSummary s;
  try {
    auto d = sparse_divisors_impl<long long>(M);
    s.rank = d.size();
    for (auto v : d)
      if (v > 1) s.nontrivial.push_back(BigInt(v));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Overflow) throw;
    auto d = sparse_divisors_impl<BigInt>(M);
    s.rank = d.size();
    s.nontrivial.clear();
    for (auto& v : d)
      if (v > 1) s.nontrivial.push_back(v);
  }
  return s;
}

// Rank over GF(p) of a sparse matrix (columns), by dense elimination.
inline std::size_t rank_mod_p(std::size_t rows, const std::vector<std::vector<std::pair<std::int32_t, long long>>>& cols,
                              std::uint64_t p) {
  const std::size_t C = cols.size();
  if (rows == 0 || C == 0) return 0;
  std::vector<std::uint64_t> M(rows * C, 0);
  for (std::size_t j = 0; j < C; ++j)
    for (auto& [i, v] : cols[j]) {
      long long m = v % static_cast<long long>(p);
      if (m < 0) m += static_cast<long long>(p);
      M[i * C + j] = static_cast<std::uint64_t>(m);
    }
  auto mulmod = [p](std::uint64_t a, std::uint64_t b) { return static_cast<std::uint64_t>((__uint128_t)a * b % p); };
  auto powmod = [&](std::uint64_t a, std::uint64_t e) {
    std::uint64_t r = 1;
    while (e) {
      if (e & 1) r = mulmod(r, a);
      a = mulmod(a, a);
      e >>= 1;
    }
    return r;
  };
  std::size_t rank = 0;
  for (std::size_t j = 0; j < C && rank < rows; ++j) {
    std::size_t piv = rows;
    for (std::size_t i = rank; i < rows; ++i)
      if (M[i * C + j]) {
        piv = i;
        break;
      }
    if (piv == rows) continue;
    if (piv != rank)
      for (std::size_t k = 0; k < C; ++k) std::swap(M[piv * C + k], M[rank * C + k]);
    std::uint64_t inv = powmod(M[rank * C + j], p - 2);
    for (std::size_t i = rank + 1; i < rows; ++i) {
      std::uint64_t f = M[i * C + j];
      if (!f) continue;
      f = mulmod(f, inv);
      for (std::size_t k = j; k < C; ++k) {
        std::uint64_t s = mulmod(f, M[rank * C + k]);
        M[i * C + k] = (M[i * C + k] + p - s) % p;
      }
    }
    ++rank;
  }
  return rank;
}

}  // namespace swfc
