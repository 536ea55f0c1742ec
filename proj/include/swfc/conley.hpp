#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "swfc/cubical.hpp"
#include "swfc/error.hpp"

namespace swfc {

struct IsolationCertificate {
  CubicalSet A;
  CubicalSet S;
  bool ok = false;
  int margin = 0;  // layers of A that can be peeled before touching S
};

inline IsolationCertificate isolating_check(const MultivaluedMap& F, const CubicalSet& A) {
  IsolationCertificate c;
  c.A = A;
  c.S = invariant_part(F, A);
  const auto& f = A.frame();
  Mask s = c.S.mask();
  Mask x = A.mask();
  int k = 0;
  while (ops::any(x)) {
    Mask col = ops::collar(f, x);
    if (ops::any(ops::and_mask(col, s))) break;
    x = ops::minus_mask(x, col);
    ++k;
  }
  c.margin = k;
  c.ok = k >= 1 || c.S.empty();
  return c;
}

inline CubicalSet p_operator(const MultivaluedMap& F, const CubicalSet& B, const CubicalSet& A) {
  require(B.subset_of(A), ErrorCode::InvalidArgument, "B must be contained in A");
  return CubicalSet::from_mask(F.frame(), ops::forward_reach(F, B.mask(), A.mask()));
}

struct IndexPairCertificate {
  bool cond1 = false;  // Inv(N \ L) = S, S away from the collar of N \ L
  bool cond2 = false;  // F(N \ L) inside N
  bool cond3 = false;  // F(L) meets N only in L
  bool all() const { return cond1 && cond2 && cond3; }
};

struct IndexPair {
  CubicalSet N;
  CubicalSet L;
  CubicalSet S;
  IndexPairCertificate certificate;
  int collar_width = 0;
};

// `isolated` (default S) is the part of S that must stay off the collar of N \ L.
inline IndexPairCertificate verify_index_pair(const MultivaluedMap& F, const CubicalSet& N, const CubicalSet& L,
                                              const CubicalSet& S, const CubicalSet* isolated = nullptr) {
  require(L.subset_of(N), ErrorCode::InvalidArgument, "L must be contained in N");
  const auto& f = F.frame();
  IndexPairCertificate c;
  CubicalSet core = N.minus(L);
  CubicalSet inv = invariant_part(F, core);
  Mask coll = ops::collar(f, core.mask());
  bool touches = false;
  for (auto q : (isolated ? *isolated : S)) touches = touches || coll[q];
  c.cond1 = inv == S && !touches;

  Mask nm = N.mask();
  PrefixTable PN(f, nm);
  c.cond2 = true;
  for (auto q : core)
    if (!ops::box_inside(F, PN, q)) {
      c.cond2 = false;
      break;
    }

  PrefixTable Pcore(f, core.mask());
  c.cond3 = true;
  for (auto q : L)
    if (ops::box_meets(F, Pcore, q)) {
      c.cond3 = false;
      break;
    }
  return c;
}

struct IndexPairOptions {
  int max_width = 8;
  std::size_t k_max = 0;
};

// Discrete version of the appendix construction, widening the collar of V
// until the verification passes.
inline IndexPair index_pair(const MultivaluedMap& F, const CubicalSet& A, const CubicalSet& K1,
                            const CubicalSet& K2, const IndexPairOptions& opt = {}) {
  const auto& f = F.frame();
  require(K1.subset_of(A) && K2.subset_of(A), ErrorCode::InvalidArgument, "K1 and K2 must lie in A");
  auto parts = invariant_parts(F, A, opt.k_max);
  Mask a = A.mask();
  Mask plus = parts.forward.mask();
  Mask minus = parts.backward.mask();
  Mask k1 = K1.mask();
  Mask k2 = K2.mask();
  Mask collarA = ops::collar(f, a);

  if (ops::any(ops::and_mask(k2, plus)))
    fail(ErrorCode::HypothesisViolationII, "K2 meets the forward-invariant part A+");
  Mask pk1 = ops::forward_reach(F, k1, a);
  if (ops::any(ops::and_mask(ops::and_mask(pk1, plus), collarA)))
    fail(ErrorCode::HypothesisViolationI, "P(K1) meets A+ on the boundary collar of A");

  PrefixTable PA(f, a);
  Mask exits(a.size(), 0);
  for (auto q : A)
    if (!ops::box_inside(F, PA, q)) exits[q] = 1;
  Mask edge = ops::or_mask(exits, collarA);

  std::string last_reason = "no width attempted";
  for (int w = 1; w <= opt.max_width; ++w) {
    Mask V = ops::minus_mask(ops::and_mask(ops::dilate(f, plus, w), a), k2);
    Mask C = ops::and_mask(V, edge);
    if (ops::any(ops::and_mask(C, minus))) {
      last_reason = "collar of A+ on the boundary meets A- at width " + std::to_string(w);
      break;
    }
    if (ops::any(ops::and_mask(C, pk1))) {
      last_reason = "collar of A+ on the boundary meets P(K1) at width " + std::to_string(w);
      break;
    }
    Mask RC = ops::backward_reach(F, C, a);
    Mask B = ops::or_mask(ops::minus_mask(ops::and_mask(ops::dilate(f, minus, w), a), RC), k1);
    Mask L = ops::forward_reach(F, ops::minus_mask(a, V), a);
    Mask N = ops::or_mask(ops::forward_reach(F, B, a), L);
    IndexPair ip;
    ip.N = CubicalSet::from_mask(f, N);
    ip.L = CubicalSet::from_mask(f, L);
    ip.S = parts.invariant;
    ip.collar_width = w;
    ip.certificate = verify_index_pair(F, ip.N, ip.L, ip.S);
    if (ip.certificate.all()) return ip;
    last_reason = "verification failed at width " + std::to_string(w);
  }
  fail(ErrorCode::ConstructionFailure, last_reason + "; refine the grid");
}

// ---------------------------------------------------------------------------
// Morse sets and attractor-repeller splits.

// Range of the energy over a cube, from corner and center samples.
using CubeRange = std::function<std::pair<double, double>(CubeIndex)>;

template <class Energy>
CubeRange sampled_range(const GridFrame& f, Energy energy) {
  return [f, energy](CubeIndex c) {
    const std::size_t d = f.dim();
    std::vector<int> m(d);
    f.multi(c, m.data());
    std::vector<double> x(d);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (unsigned q = 0; q < (1u << d); ++q) {
      for (std::size_t k = 0; k < d; ++k) x[k] = f.origin[k] + f.h * (m[k] + ((q >> k) & 1u));
      double v = energy(std::span<const double>(x));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (std::size_t k = 0; k < d; ++k) x[k] = f.origin[k] + f.h * (m[k] + 0.5);
    double v = energy(std::span<const double>(x));
    return std::pair{std::min(lo, v), std::max(hi, v)};
  };
}

using CubePredicate = std::function<bool(CubeIndex)>;

// Cubes on which the field may vanish: |f(center)| within the local Lipschitz
// bound times the half diagonal.
template <VectorField Field>
CubePredicate may_contain_zero(const GridFrame& f, const Field& field, double lipschitz_factor = 1.25) {
  return [f, &field, lipschitz_factor](CubeIndex c) {
    const std::size_t d = f.dim();
    std::vector<int> m(d);
    f.multi(c, m.data());
    std::vector<double> x(d), y(d), J(d * d);
    double L = 0;
    for (unsigned q = 0; q < (1u << d); ++q) {
      for (std::size_t k = 0; k < d; ++k) x[k] = f.origin[k] + f.h * (m[k] + ((q >> k) & 1u));
      jacobian_of(field, x, J);
      L = std::max(L, operator_norm_bound(J, d));
    }
    f.center(c, x.data());
    jacobian_of(field, x, J);
    L = std::max(L, operator_norm_bound(J, d));
    field.eval(x, y);
    double n2 = 0;
    for (double v : y) n2 += v * v;
    return std::sqrt(n2) <= lipschitz_factor * L * 0.5 * f.h * std::sqrt(static_cast<double>(d)) + 1e-12;
  };
}

struct MorseSet {
  CubicalSet cubes;
  double lo = 0, hi = 0;  // energy range over the cubes
};

// Recurrent strongly connected components of the map restricted to S. With a
// predicate, components without a cube satisfying it are dropped.
inline std::vector<MorseSet> morse_sets(const MultivaluedMap& F, const CubicalSet& S, const CubeRange& range,
                                        const CubePredicate& critical = nullptr) {
  const auto& f = F.frame();
  const std::size_t n = S.size();
  std::vector<std::int32_t> pos(static_cast<std::size_t>(f.size()), -1);
  for (std::size_t i = 0; i < n; ++i) pos[S.cubes()[i]] = static_cast<std::int32_t>(i);
  std::vector<std::vector<std::int32_t>> adj(n);
  std::vector<char> self(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    F.for_each_image(S.cubes()[i], [&](CubeIndex q) {
      auto p = pos[q];
      if (p < 0) return;
      if (static_cast<std::size_t>(p) == i) self[i] = 1;
      adj[i].push_back(p);
    });
  }
  // Iterative Tarjan.
  std::vector<std::int32_t> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<char> on(n, 0);
  std::vector<std::int32_t> stack;
  std::vector<std::pair<std::int32_t, std::size_t>> call;
  std::int32_t counter = 0, ncomp = 0;
  for (std::size_t s0 = 0; s0 < n; ++s0) {
    if (index[s0] >= 0) continue;
    call.push_back({static_cast<std::int32_t>(s0), 0});
    while (!call.empty()) {
      auto& [v, it] = call.back();
      if (it == 0 && index[v] < 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on[v] = 1;
      }
      if (it < adj[v].size()) {
        auto w = adj[v][it++];
        if (index[w] < 0) {
          call.push_back({w, 0});
        } else if (on[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        while (true) {
          auto w = stack.back();
          stack.pop_back();
          on[w] = 0;
          comp[w] = ncomp;
          if (w == v) break;
        }
        ++ncomp;
      }
      auto done = v;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
    }
  }
  std::vector<std::vector<CubeIndex>> members(ncomp);
  for (std::size_t i = 0; i < n; ++i) members[comp[i]].push_back(S.cubes()[i]);
  std::vector<MorseSet> out;
  for (std::int32_t c = 0; c < ncomp; ++c) {
    auto& mem = members[c];
    bool recurrent = mem.size() > 1 || self[pos[mem[0]]];
    if (!recurrent) continue;
    if (critical && std::none_of(mem.begin(), mem.end(), [&](CubeIndex q) { return critical(q); })) continue;
    MorseSet ms;
    ms.cubes = CubicalSet(f, mem);
    ms.lo = std::numeric_limits<double>::infinity();
    ms.hi = -ms.lo;
    for (auto q : mem) {
      auto [a, b] = range(q);
      ms.lo = std::min(ms.lo, a);
      ms.hi = std::max(ms.hi, b);
    }
    out.push_back(std::move(ms));
  }
  std::sort(out.begin(), out.end(), [](const MorseSet& a, const MorseSet& b) {
    return a.cubes.cubes().front() < b.cubes.cubes().front();
  });
  return out;
}

struct AttractorRepeller {
  CubicalSet T;       // attractor below the level
  CubicalSet T_star;  // dual repeller
  CubicalSet N1, N2, N3;
  IndexPairCertificate pair12, pair13, pair23;
  std::vector<MorseSet> morse;
  double level = 0;
  bool all_certified() const { return pair12.all() && pair13.all() && pair23.all(); }
};

// Splits an index pair (N1, N3) of S at the level a.
inline AttractorRepeller split_index_pair(const MultivaluedMap& F, const IndexPair& pair, const CubeRange& range,
                                          double a, const CubePredicate& critical = nullptr) {
  const auto& f = F.frame();
  const CubicalSet& S = pair.S;
  AttractorRepeller ar;
  ar.level = a;
  ar.morse = morse_sets(F, S, range, critical);
  Mask s = S.mask();
  Mask low(s.size(), 0), high(s.size(), 0);
  for (const auto& ms : ar.morse) {
    if (ms.lo <= a && a <= ms.hi) {
      std::ostringstream os;
      os << "a Morse set has energy range [" << ms.lo << ", " << ms.hi << "] containing the level " << a;
      fail(ErrorCode::NotRegularLevel, os.str());
    }
    for (auto q : ms.cubes) (ms.hi < a ? low : high)[q] = 1;
  }
  Mask fwd = ops::forward_reach(F, low, s);
  CubicalSet Tset = invariant_part(F, CubicalSet::from_mask(f, fwd));
  Mask t = Tset.mask();
  if (ops::any(ops::and_mask(t, high)))
    fail(ErrorCode::ConstructionFailure, "the part of S below the level reaches a Morse set above it");
  CubicalSet Tstar = invariant_part(F, S.minus(Tset));
  ar.T = Tset;
  ar.T_star = Tstar;
  ar.N1 = pair.N;
  ar.N3 = pair.L;
  if (Tset.empty()) {
    ar.N2 = pair.L;
  } else if (Tstar.empty()) {
    ar.N2 = pair.N;
  } else {
    Mask core = pair.N.minus(pair.L).mask();
    Mask reach = ops::backward_reach(F, Tstar.mask(), core);
    ar.N2 = CubicalSet::from_mask(f, ops::minus_mask(pair.N.mask(), ops::and_mask(reach, core)));
  }
  auto core_of = [&](const CubicalSet& X) {
    if (!critical) return X;
    std::vector<CubeIndex> keep;
    for (auto q : X)
      if (critical(q)) keep.push_back(q);
    return CubicalSet(f, std::move(keep));
  };
  CubicalSet iso_star = core_of(ar.T_star), iso = core_of(ar.T), iso_all = core_of(S);
  ar.pair12 = verify_index_pair(F, ar.N1, ar.N2, ar.T_star, &iso_star);
  ar.pair23 = verify_index_pair(F, ar.N2, ar.N3, ar.T, &iso);
  ar.pair13 = verify_index_pair(F, ar.N1, ar.N3, S, &iso_all);
  return ar;
}

inline AttractorRepeller attractor_repeller(const MultivaluedMap& F, const CubicalSet& A, const CubeRange& range,
                                            double a, const CubePredicate& critical = nullptr,
                                            const IndexPairOptions& opt = {}) {
  CubicalSet empty(A.frame());
  IndexPair ip = index_pair(F, A, empty, empty, opt);
  return split_index_pair(F, ip, range, a, critical);
}

inline std::string certificate_json(const IndexPairCertificate& c) {
  std::ostringstream os;
  os << "{\"cond1\": " << (c.cond1 ? "true" : "false") << ", \"cond2\": " << (c.cond2 ? "true" : "false")
     << ", \"cond3\": " << (c.cond3 ? "true" : "false") << "}";
  return os.str();
}

// Record format of a pair: the two cubical-set records, N first, then the certificate line.
inline std::string write_index_pair(const IndexPair& p) {
  return "swfc-index-pair 1\n" + write_cubical_set(p.N) + write_cubical_set(p.L) + "certificate " +
         certificate_json(p.certificate) + "\n";
}

}  // namespace swfc
