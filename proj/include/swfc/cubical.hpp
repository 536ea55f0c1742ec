#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "swfc/error.hpp"
#include "swfc/field.hpp"
#include "swfc/ode.hpp"
#include "swfc/spectrum.hpp"

namespace swfc {

using CubeIndex = std::int64_t;
using Mask = std::vector<std::uint8_t>;

struct Box {
  std::vector<double> lo, hi;
  std::size_t dim() const { return lo.size(); }
};

// Uniform grid of cubes [origin + h m, origin + h (m + 1)], 0 <= m_k < extent_k.
// Linear index is row-major with the last axis fastest.
struct GridFrame {
  std::vector<double> origin;
  double h = 1.0;
  std::vector<int> extent;

  std::size_t dim() const { return extent.size(); }

  CubeIndex size() const {
    CubeIndex s = 1;
    for (int e : extent) s *= e;
    return s;
  }

  CubeIndex linear(const int* m) const {
    CubeIndex idx = 0;
    for (std::size_t k = 0; k < extent.size(); ++k) idx = idx * extent[k] + m[k];
    return idx;
  }

  void multi(CubeIndex idx, int* m) const {
    for (std::size_t k = extent.size(); k-- > 0;) {
      m[k] = static_cast<int>(idx % extent[k]);
      idx /= extent[k];
    }
  }

  void center(CubeIndex idx, double* x) const {
    std::vector<int> m(dim());
    multi(idx, m.data());
    for (std::size_t k = 0; k < dim(); ++k) x[k] = origin[k] + h * (m[k] + 0.5);
  }

  bool operator==(const GridFrame& o) const { return origin == o.origin && h == o.h && extent == o.extent; }
};

class CubicalSet {
 public:
  CubicalSet() = default;
  explicit CubicalSet(GridFrame frame) : frame_(std::move(frame)) {}
  CubicalSet(GridFrame frame, std::vector<CubeIndex> cubes) : frame_(std::move(frame)), cubes_(std::move(cubes)) {
    std::sort(cubes_.begin(), cubes_.end());
    cubes_.erase(std::unique(cubes_.begin(), cubes_.end()), cubes_.end());
    require(cubes_.empty() || (cubes_.front() >= 0 && cubes_.back() < frame_.size()), ErrorCode::InvalidArgument,
            "cube index outside the frame");
  }

  static CubicalSet from_mask(const GridFrame& frame, const Mask& mask) {
    CubicalSet s(frame);
    for (CubeIndex i = 0; i < static_cast<CubeIndex>(mask.size()); ++i)
      if (mask[i]) s.cubes_.push_back(i);
    return s;
  }

  Mask mask() const {
    Mask m(static_cast<std::size_t>(frame_.size()), 0);
    for (auto c : cubes_) m[c] = 1;
    return m;
  }

  const GridFrame& frame() const { return frame_; }
  std::size_t dim() const { return frame_.dim(); }
  const std::vector<CubeIndex>& cubes() const { return cubes_; }
  std::size_t size() const { return cubes_.size(); }
  bool empty() const { return cubes_.empty(); }
  auto begin() const { return cubes_.begin(); }
  auto end() const { return cubes_.end(); }

  bool contains(CubeIndex c) const { return std::binary_search(cubes_.begin(), cubes_.end(), c); }

  bool subset_of(const CubicalSet& o) const {
    return std::includes(o.cubes_.begin(), o.cubes_.end(), cubes_.begin(), cubes_.end());
  }

  bool operator==(const CubicalSet& o) const { return frame_ == o.frame_ && cubes_ == o.cubes_; }

  CubicalSet unite(const CubicalSet& o) const {
    check(o);
    CubicalSet r(frame_);
    std::set_union(cubes_.begin(), cubes_.end(), o.cubes_.begin(), o.cubes_.end(), std::back_inserter(r.cubes_));
    return r;
  }
  CubicalSet intersect(const CubicalSet& o) const {
    check(o);
    CubicalSet r(frame_);
    std::set_intersection(cubes_.begin(), cubes_.end(), o.cubes_.begin(), o.cubes_.end(),
                          std::back_inserter(r.cubes_));
    return r;
  }
  CubicalSet minus(const CubicalSet& o) const {
    check(o);
    CubicalSet r(frame_);
    std::set_difference(cubes_.begin(), cubes_.end(), o.cubes_.begin(), o.cubes_.end(), std::back_inserter(r.cubes_));
    return r;
  }

 private:
  void check(const CubicalSet& o) const {
    require(frame_ == o.frame_, ErrorCode::InvalidArgument, "cubical sets live on different frames");
  }

  GridFrame frame_;
  std::vector<CubeIndex> cubes_;
};

inline constexpr CubeIndex kDefaultGridBudget = 10'000'000;

inline GridFrame frame_for_box(const Box& box, double h, CubeIndex budget = kDefaultGridBudget) {
  require(h > 0, ErrorCode::InvalidArgument, "cube size must be positive");
  require(box.lo.size() == box.hi.size(), ErrorCode::InvalidArgument, "box corners differ in dimension");
  GridFrame f;
  f.h = h;
  f.origin = box.lo;
  double total = 1;
  for (std::size_t k = 0; k < box.dim(); ++k) {
    double len = box.hi[k] - box.lo[k];
    require(len > 0, ErrorCode::InvalidArgument, "degenerate box");
    int n = static_cast<int>(std::ceil(len / h - 1e-9));
    f.extent.push_back(std::max(n, 1));
    total *= f.extent.back();
  }
  if (total > static_cast<double>(budget))
    fail(ErrorCode::GridTooLarge, "grid needs " + std::to_string(static_cast<long long>(total)) +
                                      " cubes, budget is " + std::to_string(budget));
  return f;
}

inline CubicalSet build_grid(const Box& box, double h, CubeIndex budget = kDefaultGridBudget) {
  GridFrame f = frame_for_box(box, h, budget);
  std::vector<CubeIndex> all(static_cast<std::size_t>(f.size()));
  for (CubeIndex i = 0; i < f.size(); ++i) all[i] = i;
  return CubicalSet(f, std::move(all));
}

// Cubes of the frame whose centers lie in the closed ball of radius r about 0.
inline CubicalSet ball_cubes(const GridFrame& f, double r) {
  CubicalSet s(f);
  std::vector<CubeIndex> out;
  std::vector<double> c(f.dim());
  for (CubeIndex i = 0; i < f.size(); ++i) {
    f.center(i, c.data());
    double q = 0;
    for (double v : c) q += v * v;
    if (q <= r * r) out.push_back(i);
  }
  return CubicalSet(f, std::move(out));
}

// ---------------------------------------------------------------------------
// Box arithmetic on the frame: d-dimensional prefix sums for "does a box meet X"
// and difference arrays for "how many boxes cover this cube".

namespace detail {

struct Padded {
  std::vector<int> ext;  // extent + 1
  std::vector<CubeIndex> stride;
  CubeIndex size = 1;

  explicit Padded(const GridFrame& f) {
    const std::size_t d = f.dim();
    ext.resize(d);
    stride.resize(d);
    for (std::size_t k = 0; k < d; ++k) ext[k] = f.extent[k] + 1;
    size = 1;
    for (std::size_t k = d; k-- > 0;) {
      stride[k] = size;
      size *= ext[k];
    }
  }
};

inline void prefix_along_axes(std::vector<std::int32_t>& a, const Padded& p) {
  const std::size_t d = p.ext.size();
  for (std::size_t k = 0; k < d; ++k) {
    const CubeIndex st = p.stride[k];
    const CubeIndex len = p.ext[k];
    // Lines along axis k: every index whose k-th coordinate is 0.
    for (CubeIndex base = 0; base < p.size; ++base) {
      if ((base / st) % len != 0) continue;
      CubeIndex idx = base;
      std::int32_t run = 0;
      for (CubeIndex t = 0; t < len; ++t, idx += st) {
        run += a[idx];
        a[idx] = run;
      }
    }
  }
}

// Walks all frame cubes in order with their padded offset.
template <class Fn>
void for_each_cube(const GridFrame& f, const Padded& p, Fn&& fn) {
  const std::size_t d = f.dim();
  std::vector<int> m(d, 0);
  const CubeIndex n = f.size();
  for (CubeIndex i = 0; i < n; ++i) {
    CubeIndex off = 0;
    for (std::size_t k = 0; k < d; ++k) off += (m[k] + 1) * p.stride[k];
    fn(i, off);
    for (std::size_t k = d; k-- > 0;) {
      if (++m[k] < f.extent[k]) break;
      m[k] = 0;
    }
  }
}

}  // namespace detail

class PrefixTable {
 public:
  PrefixTable(const GridFrame& f, const Mask& mask) : frame_(&f), pad_(f) {
    table_.assign(static_cast<std::size_t>(pad_.size), 0);
    detail::for_each_cube(f, pad_, [&](CubeIndex i, CubeIndex off) { table_[off] = mask[i] ? 1 : 0; });
    detail::prefix_along_axes(table_, pad_);
  }

  // Number of marked cubes in the box [lo, hi], clipped to the frame.
  std::int64_t count(const int* lo, const int* hi) const {
    const std::size_t d = pad_.ext.size();
    int a[16], b[16];
    for (std::size_t k = 0; k < d; ++k) {
      a[k] = std::max(lo[k], 0);
      b[k] = std::min(hi[k], frame_->extent[k] - 1);
      if (a[k] > b[k]) return 0;
    }
    std::int64_t s = 0;
    const unsigned corners = 1u << d;
    for (unsigned c = 0; c < corners; ++c) {
      CubeIndex off = 0;
      int parity = 0;
      for (std::size_t k = 0; k < d; ++k) {
        if (c & (1u << k)) {
          off += static_cast<CubeIndex>(a[k]) * pad_.stride[k];
          ++parity;
        } else {
          off += static_cast<CubeIndex>(b[k] + 1) * pad_.stride[k];
        }
      }
      s += (parity & 1) ? -table_[off] : table_[off];
    }
    return s;
  }

 private:
  const GridFrame* frame_;
  detail::Padded pad_;
  std::vector<std::int32_t> table_;
};

// ---------------------------------------------------------------------------

// Outer approximation of the time-T flow: each domain cube maps to an integer
// box of cubes (unclipped, so it may reach outside the frame).
class MultivaluedMap {
 public:
  MultivaluedMap() = default;
  MultivaluedMap(CubicalSet domain, std::vector<std::int32_t> boxes, double T, double max_bloat)
      : domain_(std::move(domain)), boxes_(std::move(boxes)), T_(T), bloat_(max_bloat) {
    require(boxes_.size() == 2 * domain_.dim() * domain_.size(), ErrorCode::InvalidArgument, "box array size mismatch");
    position_.assign(static_cast<std::size_t>(frame().size()), -1);
    for (std::size_t p = 0; p < domain_.size(); ++p) position_[domain_.cubes()[p]] = static_cast<std::int32_t>(p);
  }

  const GridFrame& frame() const { return domain_.frame(); }
  const CubicalSet& domain() const { return domain_; }
  double T() const { return T_; }
  double bloat() const { return bloat_; }
  std::size_t dim() const { return domain_.dim(); }
  const std::vector<std::int32_t>& raw_boxes() const { return boxes_; }

  bool in_domain(CubeIndex c) const { return position_[c] >= 0; }

  const std::int32_t* lo(CubeIndex c) const { return boxes_.data() + 2 * dim() * position_[c]; }
  const std::int32_t* hi(CubeIndex c) const { return lo(c) + dim(); }

  bool box_inside_frame(CubeIndex c) const {
    const auto* a = lo(c);
    const auto* b = hi(c);
    for (std::size_t k = 0; k < dim(); ++k)
      if (a[k] < 0 || b[k] >= frame().extent[k]) return false;
    return true;
  }

  std::int64_t box_volume(CubeIndex c) const {
    std::int64_t v = 1;
    for (std::size_t k = 0; k < dim(); ++k) v *= hi(c)[k] - lo(c)[k] + 1;
    return v;
  }

  // Cubes of the image inside the frame, sorted.
  std::vector<CubeIndex> images(CubeIndex c) const {
    std::vector<CubeIndex> out;
    for_each_image(c, [&](CubeIndex q) { out.push_back(q); });
    return out;
  }

  template <class Fn>
  void for_each_image(CubeIndex c, Fn&& fn) const {
    const std::size_t d = dim();
    int a[16], b[16], m[16];
    for (std::size_t k = 0; k < d; ++k) {
      a[k] = std::max<int>(lo(c)[k], 0);
      b[k] = std::min<int>(hi(c)[k], frame().extent[k] - 1);
      if (a[k] > b[k]) return;
      m[k] = a[k];
    }
    while (true) {
      fn(frame().linear(m));
      std::size_t k = d;
      while (k-- > 0) {
        if (++m[k] <= b[k]) break;
        m[k] = a[k];
      }
      if (k == static_cast<std::size_t>(-1)) break;
    }
  }

 private:
  CubicalSet domain_;
  std::vector<std::int32_t> boxes_;
  std::vector<std::int32_t> position_;
  double T_ = 0;
  double bloat_ = 0;
};

struct FlowMapOptions {
  double T = 0.0;           // 0 selects time_scale * h / max |f|
  double time_scale = 8.0;
  double safety = 0.05;     // extra padding in units of h
  double tol = 0.0;         // 0 selects 1e-4 h
  double lipschitz_factor = 1.25;
  unsigned workers = 1;
};

// Radius within which every point of a unit cube sees a corner or the center.
inline double sample_covering_radius(std::size_t d) {
  std::size_t k = d / 2;
  double rest = d / 4.0 - k / 2.0;
  return std::sqrt(k / 4.0 + rest * rest);
}

namespace detail {

template <class Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || n < 2 * workers) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e, w] { fn(b, e, w); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

template <VectorField F>
MultivaluedMap flow_map_outer(const F& field, const CubicalSet& A, const FlowMapOptions& opt = {}) {
  const GridFrame& f = A.frame();
  const std::size_t d = f.dim();
  require(field.dim() == d, ErrorCode::InvalidArgument, "field and grid dimensions differ");
  require(d <= 12, ErrorCode::GridTooLarge, "grid dimension above 12");
  const double h = f.h;

  // Vertex lattice with extents n_k + 1.
  std::vector<int> vext(d);
  std::vector<CubeIndex> vstride(d);
  CubeIndex nv = 1;
  for (std::size_t k = d; k-- > 0;) {
    vext[k] = f.extent[k] + 1;
    vstride[k] = nv;
    nv *= vext[k];
  }
  const unsigned corners = 1u << d;
  std::vector<CubeIndex> corner_off(corners);
  for (unsigned c = 0; c < corners; ++c) {
    CubeIndex o = 0;
    for (std::size_t k = 0; k < d; ++k)
      if (c & (1u << k)) o += vstride[k];
    corner_off[c] = o;
  }
  auto vertex_of = [&](CubeIndex cube) {
    int m[16];
    f.multi(cube, m);
    CubeIndex v = 0;
    for (std::size_t k = 0; k < d; ++k) v += m[k] * vstride[k];
    return v;
  };

  // Used vertices in increasing order.
  std::vector<std::uint8_t> vused(static_cast<std::size_t>(nv), 0);
  for (auto c : A) {
    CubeIndex v = vertex_of(c);
    for (unsigned q = 0; q < corners; ++q) vused[v + corner_off[q]] = 1;
  }
  std::vector<CubeIndex> verts;
  for (CubeIndex v = 0; v < nv; ++v)
    if (vused[v]) verts.push_back(v);
  std::vector<std::int32_t> vpos(static_cast<std::size_t>(nv), -1);
  for (std::size_t i = 0; i < verts.size(); ++i) vpos[verts[i]] = static_cast<std::int32_t>(i);

  auto vertex_point = [&](CubeIndex v, double* x) {
    for (std::size_t k = d; k-- > 0;) {
      int mk = static_cast<int>(v % vext[k]);
      v /= vext[k];
      x[k] = f.origin[k] + h * mk;
    }
  };

  const std::size_t nvu = verts.size();
  const std::size_t nc = A.size();
  std::vector<double> vnorm(nvu, 0.0), vlip(nvu, 0.0);  // lip: log-norm bounds
  std::vector<double> cnorm(nc, 0.0);
  std::vector<double> vimg(nvu * d), cimg(nc * d), clip(nc, 0.0);

  // Pass 1: field magnitudes and local one-sided Lipschitz estimates.
  detail::parallel_chunks(nvu, opt.workers, [&](std::size_t b, std::size_t e, unsigned) {
    std::vector<double> x(d), y(d), J(d * d);
    for (std::size_t i = b; i < e; ++i) {
      vertex_point(verts[i], x.data());
      field.eval(x, y);
      double s = 0;
      for (double v : y) s += v * v;
      vnorm[i] = std::sqrt(s);
      jacobian_of(field, x, J);
      vlip[i] = log_norm_bound(J, d);
    }
  });
  detail::parallel_chunks(nc, opt.workers, [&](std::size_t b, std::size_t e, unsigned) {
    std::vector<double> x(d), y(d), J(d * d);
    for (std::size_t i = b; i < e; ++i) {
      f.center(A.cubes()[i], x.data());
      field.eval(x, y);
      double s = 0;
      for (double v : y) s += v * v;
      cnorm[i] = std::sqrt(s);
      jacobian_of(field, x, J);
      clip[i] = log_norm_bound(J, d);
    }
  });

  double T = opt.T;
  if (T <= 0) {
    double vmax = 0;
    for (double v : vnorm) vmax = std::max(vmax, v);
    for (double v : cnorm) vmax = std::max(vmax, v);
    T = vmax > 0 ? opt.time_scale * h / vmax : 1.0;
  }
  const double tol = opt.tol > 0 ? opt.tol : 1e-4 * h;
  IntegratorOptions iopt;
  iopt.tol = tol;

  // Pass 2: integrate every used vertex and every center once.
  detail::parallel_chunks(nvu, opt.workers, [&](std::size_t b, std::size_t e, unsigned) {
    Dopri5<F> ode(field, iopt);
    std::vector<double> x(d);
    for (std::size_t i = b; i < e; ++i) {
      vertex_point(verts[i], x.data());
      ode.run(x, T);
      for (std::size_t k = 0; k < d; ++k) vimg[i * d + k] = x[k];
    }
  });
  detail::parallel_chunks(nc, opt.workers, [&](std::size_t b, std::size_t e, unsigned) {
    Dopri5<F> ode(field, iopt);
    std::vector<double> x(d), y(d), J(d * d);
    for (std::size_t i = b; i < e; ++i) {
      f.center(A.cubes()[i], x.data());
      ode.run(x, T);
      for (std::size_t k = 0; k < d; ++k) cimg[i * d + k] = x[k];
      jacobian_of(field, x, J);
      clip[i] = std::max(clip[i], log_norm_bound(J, d));
    }
  });

  // Pass 3: boxes.
  const double rho = sample_covering_radius(d) * h;
  std::vector<std::int32_t> boxes(2 * d * nc);
  std::vector<double> bloat(nc);
  detail::parallel_chunks(nc, opt.workers, [&](std::size_t b, std::size_t e, unsigned) {
    std::vector<double> lo(d), hi(d);
    for (std::size_t i = b; i < e; ++i) {
      CubeIndex v0 = vertex_of(A.cubes()[i]);
      double L = clip[i];
      for (std::size_t k = 0; k < d; ++k) lo[k] = hi[k] = cimg[i * d + k];
      double xmax = 0;
      for (unsigned q = 0; q < corners; ++q) {
        std::int32_t p = vpos[v0 + corner_off[q]];
        L = std::max(L, vlip[p]);
        for (std::size_t k = 0; k < d; ++k) {
          double v = vimg[p * d + k];
          lo[k] = std::min(lo[k], v);
          hi[k] = std::max(hi[k], v);
          xmax = std::max(xmax, std::abs(v));
        }
      }
      L = L > 0 ? L * opt.lipschitz_factor : L / opt.lipschitz_factor;
      double pad = rho * std::exp(L * T) + opt.safety * h + 4.0 * tol * T * (1.0 + xmax) * std::exp(L * T);
      bloat[i] = pad;
      for (std::size_t k = 0; k < d; ++k) {
        double a = std::floor((lo[k] - pad - f.origin[k]) / h);
        double c = std::floor((hi[k] + pad - f.origin[k]) / h);
        a = std::clamp(a, -1.0e9, 1.0e9);
        c = std::clamp(c, -1.0e9, 1.0e9);
        boxes[2 * d * i + k] = static_cast<std::int32_t>(a);
        boxes[2 * d * i + d + k] = static_cast<std::int32_t>(c);
      }
    }
  });
  double bmax = 0;
  for (double v : bloat) bmax = std::max(bmax, v);
  return MultivaluedMap(A, std::move(boxes), T, bmax);
}

// ---------------------------------------------------------------------------
// Combinatorial operations on masks.

namespace ops {

// Cubes q of the frame with at least one image box of a cube in `src` covering q.
inline std::vector<std::int32_t> coverage(const MultivaluedMap& F, const std::vector<CubeIndex>& src) {
  const GridFrame& f = F.frame();
  const std::size_t d = f.dim();
  detail::Padded pad(f);
  std::vector<std::int32_t> diff(static_cast<std::size_t>(pad.size), 0);
  const unsigned corners = 1u << d;
  for (auto c : src) {
    int a[16], b[16];
    bool empty = false;
    for (std::size_t k = 0; k < d; ++k) {
      a[k] = std::max<int>(F.lo(c)[k], 0);
      b[k] = std::min<int>(F.hi(c)[k], f.extent[k] - 1);
      if (a[k] > b[k]) empty = true;
    }
    if (empty) continue;
    for (unsigned q = 0; q < corners; ++q) {
      CubeIndex off = 0;
      int parity = 0;
      for (std::size_t k = 0; k < d; ++k) {
        if (q & (1u << k)) {
          off += static_cast<CubeIndex>(b[k] + 1) * pad.stride[k];
          ++parity;
        } else {
          off += static_cast<CubeIndex>(a[k]) * pad.stride[k];
        }
      }
      diff[off] += (parity & 1) ? -1 : 1;
    }
  }
  detail::prefix_along_axes(diff, pad);
  std::vector<std::int32_t> out(static_cast<std::size_t>(f.size()));
  // Difference array is indexed by the cube's own coordinates here (no +1 shift).
  std::vector<int> m(d, 0);
  for (CubeIndex i = 0; i < f.size(); ++i) {
    CubeIndex off = 0;
    for (std::size_t k = 0; k < d; ++k) off += m[k] * pad.stride[k];
    out[i] = diff[off];
    for (std::size_t k = d; k-- > 0;) {
      if (++m[k] < f.extent[k]) break;
      m[k] = 0;
    }
  }
  return out;
}

inline std::vector<CubeIndex> members(const Mask& m) {
  std::vector<CubeIndex> out;
  for (CubeIndex i = 0; i < static_cast<CubeIndex>(m.size()); ++i)
    if (m[i]) out.push_back(i);
  return out;
}

inline bool box_meets(const MultivaluedMap& F, const PrefixTable& P, CubeIndex c) {
  int a[16], b[16];
  for (std::size_t k = 0; k < F.dim(); ++k) {
    a[k] = F.lo(c)[k];
    b[k] = F.hi(c)[k];
  }
  return P.count(a, b) > 0;
}

// Image box lies in the frame and inside the marked set.
inline bool box_inside(const MultivaluedMap& F, const PrefixTable& P, CubeIndex c) {
  if (!F.box_inside_frame(c)) return false;
  int a[16], b[16];
  for (std::size_t k = 0; k < F.dim(); ++k) {
    a[k] = F.lo(c)[k];
    b[k] = F.hi(c)[k];
  }
  return P.count(a, b) == F.box_volume(c);
}

// Largest subset of X in which every cube has a successor (A+).
inline Mask forward_prune(const MultivaluedMap& F, Mask X, std::size_t k_max) {
  const GridFrame& f = F.frame();
  for (std::size_t it = 0;; ++it) {
    if (it > k_max) fail(ErrorCode::ConstructionFailure, "reachability horizon exceeded before a fixpoint");
    PrefixTable P(f, X);
    bool changed = false;
    for (CubeIndex c = 0; c < f.size(); ++c) {
      if (!X[c]) continue;
      if (!box_meets(F, P, c)) {
        X[c] = 0;
        changed = true;
      }
    }
    if (!changed) return X;
  }
}

// Largest subset of X in which every cube has a predecessor (A-).
inline Mask backward_prune(const MultivaluedMap& F, Mask X, std::size_t k_max) {
  for (std::size_t it = 0;; ++it) {
    if (it > k_max) fail(ErrorCode::ConstructionFailure, "reachability horizon exceeded before a fixpoint");
    auto cov = coverage(F, members(X));
    bool changed = false;
    for (std::size_t c = 0; c < X.size(); ++c) {
      if (X[c] && cov[c] == 0) {
        X[c] = 0;
        changed = true;
      }
    }
    if (!changed) return X;
  }
}

// Forward closure of B within A.
inline Mask forward_reach(const MultivaluedMap& F, const Mask& B, const Mask& A) {
  Mask R(A.size(), 0);
  std::vector<CubeIndex> frontier;
  for (std::size_t c = 0; c < B.size(); ++c)
    if (B[c]) {
      R[c] = 1;
      frontier.push_back(static_cast<CubeIndex>(c));
    }
  while (!frontier.empty()) {
    auto cov = coverage(F, frontier);
    frontier.clear();
    for (std::size_t c = 0; c < A.size(); ++c) {
      if (A[c] && !R[c] && cov[c] > 0) {
        R[c] = 1;
        frontier.push_back(static_cast<CubeIndex>(c));
      }
    }
  }
  return R;
}

// Cubes of A that reach C along paths inside A (C included).
inline Mask backward_reach(const MultivaluedMap& F, const Mask& C, const Mask& A) {
  const GridFrame& f = F.frame();
  Mask R = C;
  while (true) {
    PrefixTable P(f, R);
    bool changed = false;
    for (CubeIndex c = 0; c < f.size(); ++c) {
      if (A[c] && !R[c] && box_meets(F, P, c)) {
        R[c] = 1;
        changed = true;
      }
    }
    if (!changed) return R;
  }
}

// Chebyshev dilation by w layers, clipped to the frame.
inline Mask dilate(const GridFrame& f, const Mask& X, int w) {
  const std::size_t d = f.dim();
  Mask cur = X;
  std::vector<CubeIndex> stride(d);
  CubeIndex s = 1;
  for (std::size_t k = d; k-- > 0;) {
    stride[k] = s;
    s *= f.extent[k];
  }
  for (std::size_t k = 0; k < d; ++k) {
    Mask next(cur.size(), 0);
    const int len = f.extent[k];
    for (CubeIndex base = 0; base < f.size(); ++base) {
      if ((base / stride[k]) % len != 0) continue;
      int last = -1000000;
      // Forward sweep records the distance to the last marked cube, then a backward sweep.
      for (int t = 0; t < len; ++t) {
        CubeIndex i = base + t * stride[k];
        if (cur[i]) last = t;
        if (t - last <= w) next[i] = 1;
      }
      last = 1000000;
      for (int t = len - 1; t >= 0; --t) {
        CubeIndex i = base + t * stride[k];
        if (cur[i]) last = t;
        if (last - t <= w) next[i] = 1;
      }
    }
    cur.swap(next);
  }
  return cur;
}

// Cubes of X with a 3^d-neighbour outside X or outside the frame.
inline Mask collar(const GridFrame& f, const Mask& X) {
  Mask comp(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) comp[i] = !X[i];
  Mask near = dilate(f, comp, 1);
  const std::size_t d = f.dim();
  Mask out(X.size(), 0);
  std::vector<int> m(d);
  for (CubeIndex i = 0; i < f.size(); ++i) {
    if (!X[i]) continue;
    if (near[i]) {
      out[i] = 1;
      continue;
    }
    f.multi(i, m.data());
    for (std::size_t k = 0; k < d; ++k)
      if (m[k] == 0 || m[k] == f.extent[k] - 1) out[i] = 1;
  }
  return out;
}

inline Mask and_mask(const Mask& a, const Mask& b) {
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
  return r;
}
inline Mask or_mask(const Mask& a, const Mask& b) {
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] || b[i];
  return r;
}
inline Mask minus_mask(const Mask& a, const Mask& b) {
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] && !b[i];
  return r;
}
inline bool any(const Mask& a) {
  for (auto v : a)
    if (v) return true;
  return false;
}

}  // namespace ops

struct InvariantParts {
  CubicalSet forward;   // A+
  CubicalSet backward;  // A-
  CubicalSet invariant;
};

inline InvariantParts invariant_parts(const MultivaluedMap& F, const CubicalSet& A, std::size_t k_max = 0) {
  require(A.frame() == F.frame(), ErrorCode::InvalidArgument, "set and map live on different frames");
  for (auto c : A) require(F.in_domain(c), ErrorCode::InvalidArgument, "map domain does not contain the set");
  if (k_max == 0) k_max = A.size() + 2;
  Mask a = A.mask();
  Mask plus = ops::forward_prune(F, a, k_max);
  Mask minus = ops::backward_prune(F, a, k_max);
  const auto& f = F.frame();
  return {CubicalSet::from_mask(f, plus), CubicalSet::from_mask(f, minus),
          CubicalSet::from_mask(f, ops::and_mask(plus, minus))};
}

inline CubicalSet invariant_part(const MultivaluedMap& F, const CubicalSet& A) {
  return invariant_parts(F, A).invariant;
}

// ---------------------------------------------------------------------------
// Record format.
//
//   swfc-cubical-set 1
//   dim <d>
//   origin <x_1> ... <x_d>
//   h <h>
//   extent <n_1> ... <n_d>
//   count <c>
//   <first index> <gap_2> ... <gap_c>        indices delta encoded
//
// A map adds "T <t>", "bloat <b>" before count, and after the index line one
// line per cube with lo_1 ... lo_d hi_1 ... hi_d.

namespace detail {

inline void write_frame(std::ostream& os, const GridFrame& f) {
  os << "dim " << f.dim() << "\norigin";
  for (double v : f.origin) os << " " << format_real(v);
  os << "\nh " << format_real(f.h) << "\nextent";
  for (int e : f.extent) os << " " << e;
  os << "\n";
}

inline void write_indices(std::ostream& os, const std::vector<CubeIndex>& c) {
  os << "count " << c.size() << "\n";
  CubeIndex prev = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << (i ? " " : "") << (c[i] - prev);
    prev = c[i];
  }
  os << "\n";
}

struct RecordReader {
  std::istream& is;
  std::string source;

  std::string word() {
    std::string w;
    if (!(is >> w)) fail(ErrorCode::Parse, source + ": unexpected end of record");
    return w;
  }
  void expect(const std::string& w) {
    auto got = word();
    if (got != w) fail(ErrorCode::Parse, source + ": expected '" + w + "', got '" + got + "'");
  }
  double real() { return parse_real(word(), source); }
  long long integer() { return parse_int(word(), source); }

  GridFrame frame() {
    GridFrame f;
    expect("dim");
    long long d = integer();
    if (d < 0 || d > 16) fail(ErrorCode::Parse, source + ": bad dimension");
    expect("origin");
    for (long long k = 0; k < d; ++k) f.origin.push_back(real());
    expect("h");
    f.h = real();
    expect("extent");
    for (long long k = 0; k < d; ++k) {
      long long e = integer();
      if (e < 1) fail(ErrorCode::Parse, source + ": bad extent");
      f.extent.push_back(static_cast<int>(e));
    }
    return f;
  }

  std::vector<CubeIndex> indices(const GridFrame& f) {
    expect("count");
    long long n = integer();
    if (n < 0) fail(ErrorCode::Parse, source + ": bad count");
    std::vector<CubeIndex> c;
    c.reserve(static_cast<std::size_t>(n));
    CubeIndex prev = 0;
    for (long long i = 0; i < n; ++i) {
      CubeIndex g = integer();
      if (i > 0 && g <= 0) fail(ErrorCode::Parse, source + ": indices must increase");
      prev += g;
      if (prev < 0 || prev >= f.size()) fail(ErrorCode::Parse, source + ": index outside frame");
      c.push_back(prev);
    }
    return c;
  }
};

}  // namespace detail

inline std::string write_cubical_set(const CubicalSet& s) {
  std::ostringstream os;
  os << "swfc-cubical-set 1\n";
  detail::write_frame(os, s.frame());
  detail::write_indices(os, s.cubes());
  return os.str();
}

inline CubicalSet read_cubical_set(std::istream& is, const std::string& source = "<cubical-set>") {
  detail::RecordReader rd{is, source};
  rd.expect("swfc-cubical-set");
  rd.expect("1");
  GridFrame f = rd.frame();
  auto idx = rd.indices(f);
  return CubicalSet(f, std::move(idx));
}

inline CubicalSet parse_cubical_set(const std::string& text) {
  std::istringstream is(text);
  return read_cubical_set(is);
}

inline std::string write_map(const MultivaluedMap& F) {
  std::ostringstream os;
  os << "swfc-multivalued-map 1\n";
  detail::write_frame(os, F.frame());
  os << "T " << format_real(F.T()) << "\nbloat " << format_real(F.bloat()) << "\n";
  detail::write_indices(os, F.domain().cubes());
  const std::size_t d = F.dim();
  const auto& b = F.raw_boxes();
  for (std::size_t i = 0; i < F.domain().size(); ++i) {
    for (std::size_t k = 0; k < 2 * d; ++k) os << (k ? " " : "") << b[2 * d * i + k];
    os << "\n";
  }
  return os.str();
}

inline MultivaluedMap parse_map(const std::string& text, const std::string& source = "<map>") {
  std::istringstream is(text);
  detail::RecordReader rd{is, source};
  rd.expect("swfc-multivalued-map");
  rd.expect("1");
  GridFrame f = rd.frame();
  rd.expect("T");
  double T = rd.real();
  rd.expect("bloat");
  double bloat = rd.real();
  auto idx = rd.indices(f);
  std::vector<std::int32_t> boxes(2 * f.dim() * idx.size());
  for (auto& v : boxes) v = static_cast<std::int32_t>(rd.integer());
  return MultivaluedMap(CubicalSet(f, std::move(idx)), std::move(boxes), T, bloat);
}

}  // namespace swfc
