#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "swfc/error.hpp"
#include "swfc/field.hpp"
#include "swfc/ode.hpp"
#include "swfc/spectrum.hpp"

namespace swfc {

struct CouplingEntry {
  int i = 0, j = 0, k = 0;  // i <= j <= k
  double value = 0.0;
};

// Fully symmetric cubic coupling, stored once per unordered index triple.
class CouplingTensor {
 public:
  CouplingTensor() = default;
  explicit CouplingTensor(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<CouplingEntry>& entries() const { return entries_; }

  // Sets Gamma_{ijk} (and all its permutations).
  void set(int i, int j, int k, double v) {
    require(i >= 0 && j >= 0 && k >= 0 && i < dim_ && j < dim_ && k < dim_, ErrorCode::InvalidArgument,
            "coupling index out of range");
    std::array<int, 3> t{i, j, k};
    std::sort(t.begin(), t.end());
    auto it = std::lower_bound(entries_.begin(), entries_.end(), t, [](const CouplingEntry& e, const std::array<int, 3>& key) {
      return std::tie(e.i, e.j, e.k) < std::tie(key[0], key[1], key[2]);
    });
    if (it != entries_.end() && it->i == t[0] && it->j == t[1] && it->k == t[2]) {
      if (v == 0.0)
        entries_.erase(it);
      else
        it->value = v;
    } else if (v != 0.0) {
      entries_.insert(it, {t[0], t[1], t[2], v});
    }
  }

  double get(int i, int j, int k) const {
    std::array<int, 3> t{i, j, k};
    std::sort(t.begin(), t.end());
    for (const auto& e : entries_)
      if (e.i == t[0] && e.j == t[1] && e.k == t[2]) return e.value;
    return 0.0;
  }

  // out_p = sum_{q,r} Gamma_{pqr} x_q x_r
  void apply(std::span<const double> x, std::span<double> out) const {
    for (int p = 0; p < dim_; ++p) out[p] = 0.0;
    for (const auto& e : entries_) {
      const double g = e.value;
      const double xi = x[e.i], xj = x[e.j], xk = x[e.k];
      if (e.i == e.j && e.j == e.k) {
        out[e.i] += g * xi * xi;
      } else if (e.i == e.j) {
        out[e.i] += 2 * g * xi * xk;
        out[e.k] += g * xi * xi;
      } else if (e.j == e.k) {
        out[e.i] += g * xj * xj;
        out[e.j] += 2 * g * xi * xj;
      } else {
        out[e.i] += 2 * g * xj * xk;
        out[e.j] += 2 * g * xi * xk;
        out[e.k] += 2 * g * xi * xj;
      }
    }
  }

  // J_{pm} += scale * dc_p/dx_m = scale * 2 sum_r Gamma_{pmr} x_r
  void add_jacobian(std::span<const double> x, std::span<double> J, std::span<const double> row_scale) const {
    const int d = dim_;
    auto add = [&](int p, int m, double v) { J[p * d + m] += row_scale[p] * v; };
    for (const auto& e : entries_) {
      const double g = e.value;
      int idx[3] = {e.i, e.j, e.k};
      // Visit each distinct ordered triple (p, m, r) once.
      int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
      std::array<std::array<int, 3>, 6> seen{};
      int nseen = 0;
      for (auto& pr : perm) {
        std::array<int, 3> t{idx[pr[0]], idx[pr[1]], idx[pr[2]]};
        bool dup = false;
        for (int s = 0; s < nseen; ++s) dup = dup || seen[s] == t;
        if (dup) continue;
        seen[nseen++] = t;
        add(t[0], t[1], 2 * g * x[t[2]]);
      }
    }
  }

  double cubic(std::span<const double> x) const {
    std::vector<double> c(dim_);
    apply(x, c);
    double s = 0;
    for (int p = 0; p < dim_; ++p) s += x[p] * c[p];
    return s / 3.0;
  }

  // Frobenius norm of the full symmetric array; bounds |c(u)| for unit u.
  double frobenius_norm() const {
    double s = 0;
    for (const auto& e : entries_) {
      int copies = (e.i == e.j && e.j == e.k) ? 1 : (e.i == e.j || e.j == e.k) ? 3 : 6;
      s += copies * e.value * e.value;
    }
    return std::sqrt(s);
  }

  CouplingTensor scaled(double f) const {
    CouplingTensor t = *this;
    for (auto& e : t.entries_) e.value *= f;
    return t;
  }

  // map[old] = new index or -1. Entries touching a dropped index are removed.
  CouplingTensor restricted(const std::vector<int>& map, int new_dim) const {
    CouplingTensor t(new_dim);
    for (const auto& e : entries_) {
      int a = map[e.i], b = map[e.j], c = map[e.k];
      if (a < 0 || b < 0 || c < 0) continue;
      t.set(a, b, c, e.value);
    }
    return t;
  }

 private:
  int dim_ = 0;
  std::vector<CouplingEntry> entries_;
};

// Radial C^2 cutoff: 1 on [0, inner R], 0 on [outer R, inf).
struct CutoffSpec {
  double inner = 3.0;
  double outer = 4.0;

  double value(double r, double R) const {
    double t = (r - inner * R) / ((outer - inner) * R);
    if (t <= 0) return 1.0;
    if (t >= 1) return 0.0;
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
  }
  double derivative(double r, double R) const {
    double w = (outer - inner) * R;
    double t = (r - inner * R) / w;
    if (t <= 0 || t >= 1) return 0.0;
    return -30.0 * t * t * (1 - t) * (1 - t) / w;
  }
};

class TruncatedModel {
 public:
  TruncatedModel() = default;

  TruncatedModel(Spectrum spectrum, double lambda, double mu, double R, CouplingTensor gamma,
                 CutoffSpec cutoff = {}, const BumpSpec& beta = BumpSpec::polynomial(), std::string name = "model")
      : spectrum_(std::move(spectrum)),
        window_(truncate(spectrum_, lambda, mu)),
        gamma_(std::move(gamma)),
        R_(R),
        cutoff_(cutoff),
        name_(std::move(name)) {
    require(R > 0, ErrorCode::InvalidArgument, "R must be positive");
    require(cutoff.inner > 0 && cutoff.outer > cutoff.inner, ErrorCode::InvalidArgument, "bad cutoff radii");
    coords_ = window_.coordinates();
    const int d = static_cast<int>(coords_.size());
    if (gamma_.dim() == 0 && gamma_.empty()) gamma_ = CouplingTensor(d);
    require(gamma_.dim() == d, ErrorCode::InvalidArgument,
            "coupling tensor dimension " + std::to_string(gamma_.dim()) + " does not match window dimension " +
                std::to_string(d));
    l_.resize(d);
    weights_.assign(d, 1.0);
    for (int i = 0; i < d; ++i) l_[i] = coords_[i].eigenvalue;
    if (-lambda > 1.0 && mu > 1.0) {
      beta.validate();
      for (int i = 0; i < d; ++i) weights_[i] = projection_weight(coords_[i].eigenvalue, lambda, mu, beta);
    } else {
      require(gamma_.empty(), ErrorCode::InvalidArgument,
              "a nonzero coupling needs -lambda > 1 and mu > 1 for the smoothed projection");
    }
  }

  std::size_t dim() const { return coords_.size(); }
  const Spectrum& spectrum() const { return spectrum_; }
  const SpectralWindow& window() const { return window_; }
  const std::vector<Coordinate>& coordinates() const { return coords_; }
  const std::vector<double>& l_diag() const { return l_; }
  const std::vector<double>& weights() const { return weights_; }
  const CouplingTensor& gamma() const { return gamma_; }
  double R() const { return R_; }
  const CutoffSpec& cutoff() const { return cutoff_; }
  const std::string& name() const { return name_; }
  double support_radius() const { return cutoff_.outer * R_; }

  double cutoff_at(std::span<const double> x) const { return cutoff_.value(norm(x), R_); }

  // -u(x) (l x + W c(x))
  void eval(std::span<const double> x, std::span<double> y) const {
    const std::size_t d = dim();
    double r2 = 0;
    for (std::size_t i = 0; i < d; ++i) r2 += x[i] * x[i];
    const double rs = support_radius();
    if (r2 >= rs * rs) {
      for (std::size_t i = 0; i < d; ++i) y[i] = 0.0;
      return;
    }
    double u = cutoff_.value(std::sqrt(r2), R_);
    if (gamma_.empty()) {
      for (std::size_t i = 0; i < d; ++i) y[i] = -u * l_[i] * x[i];
      return;
    }
    gamma_.apply(x, y);
    for (std::size_t i = 0; i < d; ++i) y[i] = -u * (l_[i] * x[i] + weights_[i] * y[i]);
  }

  void jacobian(std::span<const double> x, std::span<double> J) const {
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d * d; ++i) J[i] = 0.0;
    double r = norm(x);
    if (r >= support_radius()) return;
    double u = cutoff_.value(r, R_);
    double du = cutoff_.derivative(r, R_);
    std::vector<double> g(d);
    gamma_.apply(x, g);
    for (std::size_t i = 0; i < d; ++i) g[i] = l_[i] * x[i] + weights_[i] * g[i];
    for (std::size_t i = 0; i < d; ++i) J[i * d + i] = l_[i];
    gamma_.add_jacobian(x, J, weights_);
    for (std::size_t i = 0; i < d * d; ++i) J[i] *= -u;
    if (du != 0.0 && r > 0)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) J[i * d + j] -= g[i] * du * x[j] / r;
  }

  // 1/2 <x, l x> + P(x)
  double csd(std::span<const double> x) const {
    double q = 0;
    for (std::size_t i = 0; i < dim(); ++i) q += l_[i] * x[i] * x[i];
    return 0.5 * q + gamma_.cubic(x);
  }

  // l x + c(x), unweighted and without cutoff.
  void csd_gradient(std::span<const double> x, std::span<double> g) const {
    gamma_.apply(x, g);
    for (std::size_t i = 0; i < dim(); ++i) g[i] += l_[i] * x[i];
  }

  // Action of e^{i theta}: Form coordinates fixed, Spinor pairs rotated.
  void rotate(std::span<const double> x, double theta, std::span<double> out) const {
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t i = 0; i < dim(); ++i) {
      const auto& co = coords_[i];
      if (co.sector == Sector::Form) {
        out[i] = x[i];
      } else if (co.component == 0) {
        double re = x[i], im = x[co.partner];
        out[i] = c * re - s * im;
        out[co.partner] = s * re + c * im;
      }
    }
  }

  std::vector<int> form_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < dim(); ++i)
      if (coords_[i].sector == Sector::Form) out.push_back(static_cast<int>(i));
    return out;
  }

  // Bound alpha with |W c(v)| <= alpha |v|^2.
  double alpha() const {
    double wmax = 0;
    for (double w : weights_) wmax = std::max(wmax, w);
    return gamma_.frobenius_norm() * (gamma_.empty() ? 0.0 : wmax);
  }

  // Smallest |eigenvalue| on the window.
  double lambda0() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : l_) m = std::min(m, std::abs(v));
    return m;
  }

  bool gapped_shortcut_applies() const { return alpha() * 2.0 * R_ < lambda0(); }

  // The same data on a sub-window. Coordinates are matched by parent mode and replica.
  TruncatedModel restricted(double lambda, double mu) const {
    SpectralWindow w = truncate(spectrum_, lambda, mu);
    for (auto idx : w.mode_indices)
      require(std::find(window_.mode_indices.begin(), window_.mode_indices.end(), idx) != window_.mode_indices.end(),
              ErrorCode::InvalidArgument, "restricted window is not contained in the model window");
    auto key_list = [&](const SpectralWindow& win) {
      std::vector<std::array<std::size_t, 3>> keys;
      for (std::size_t k = 0; k < win.modes.size(); ++k) {
        const auto& md = win.modes[k];
        for (int r = 0; r < md.multiplicity; ++r) {
          if (md.sector == Sector::Form) {
            keys.push_back({win.mode_indices[k], static_cast<std::size_t>(r), 0});
          } else {
            keys.push_back({win.mode_indices[k], static_cast<std::size_t>(r), 0});
            keys.push_back({win.mode_indices[k], static_cast<std::size_t>(r), 1});
          }
        }
      }
      return keys;
    };
    auto old_keys = key_list(window_);
    auto new_keys = key_list(w);
    std::vector<int> map(old_keys.size(), -1);
    for (std::size_t a = 0; a < old_keys.size(); ++a)
      for (std::size_t b = 0; b < new_keys.size(); ++b)
        if (old_keys[a] == new_keys[b]) map[a] = static_cast<int>(b);
    auto g = gamma_.restricted(map, static_cast<int>(new_keys.size()));
    return TruncatedModel(spectrum_, lambda, mu, R_, g, cutoff_, BumpSpec::polynomial(), name_);
  }

  // The flow on the S^1-fixed (Form) subspace.
  TruncatedModel form_part() const {
    std::vector<EigenMode> modes;
    for (const auto& m : spectrum_.modes())
      if (m.sector == Sector::Form) modes.push_back(m);
    Spectrum fs(modes, spectrum_.info());
    std::vector<int> map(dim(), -1);
    int k = 0;
    for (std::size_t i = 0; i < dim(); ++i)
      if (coords_[i].sector == Sector::Form) map[i] = k++;
    auto g = gamma_.restricted(map, k);
    return TruncatedModel(fs, window_.lambda, window_.mu, R_, g, cutoff_, BumpSpec::polynomial(), name_ + "-fixed");
  }

 private:
  static double norm(std::span<const double> x) {
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
  }

  Spectrum spectrum_;
  SpectralWindow window_;
  CouplingTensor gamma_;
  double R_ = 1.0;
  CutoffSpec cutoff_;
  std::string name_;
  std::vector<Coordinate> coords_;
  std::vector<double> l_;
  std::vector<double> weights_;
};

inline double csd_eval(const TruncatedModel& m, std::span<const double> x) { return m.csd(x); }

inline std::vector<double> vector_field(const TruncatedModel& m, std::span<const double> x) {
  std::vector<double> y(m.dim());
  m.eval(x, y);
  return y;
}

inline Trajectory integrate(const TruncatedModel& m, std::span<const double> x0, double T, double tol) {
  return integrate_field(m, x0, T, tol);
}

// Random S^1-equivariant coupling on a window's coordinates: form-form-form
// terms plus x_a z^* H^a z with H^a Hermitian.
inline CouplingTensor random_equivariant_tensor(const std::vector<Coordinate>& coords, unsigned long long seed,
                                                double scale = 1.0) {
  const int d = static_cast<int>(coords.size());
  CouplingTensor t(d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<int> forms, re;
  for (int i = 0; i < d; ++i) {
    if (coords[i].sector == Sector::Form)
      forms.push_back(i);
    else if (coords[i].component == 0)
      re.push_back(i);
  }
  for (std::size_t a = 0; a < forms.size(); ++a)
    for (std::size_t b = a; b < forms.size(); ++b)
      for (std::size_t c = b; c < forms.size(); ++c) t.set(forms[a], forms[b], forms[c], scale * nd(rng));
  const std::size_t nc = re.size();
  for (int a : forms) {
    // H = S + iK
    for (std::size_t p = 0; p < nc; ++p) {
      for (std::size_t q = p; q < nc; ++q) {
        double s = scale * nd(rng);
        double k = p == q ? 0.0 : scale * nd(rng);
        int rp = re[p], ip = coords[rp].partner, rq = re[q], iq = coords[rq].partner;
        // Real block [[S, -K], [K, S]] on (re, im).
        t.set(a, rp, rq, s);
        t.set(a, ip, iq, s);
        if (p != q) {
          t.set(a, rp, iq, -k);
          t.set(a, ip, rq, k);
        }
      }
    }
  }
  return t;
}

// P(e^{i theta} x) = P(x) at deterministic sample points.
inline bool is_equivariant(const TruncatedModel& m, double tol = 1e-10, int samples = 16) {
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2 * M_PI);
  std::vector<double> x(m.dim()), y(m.dim());
  for (int s = 0; s < samples; ++s) {
    for (auto& v : x) v = nd(rng);
    m.rotate(x, ang(rng), y);
    double a = m.gamma().cubic(x), b = m.gamma().cubic(y);
    if (std::abs(a - b) > tol * (1.0 + std::abs(a))) return false;
  }
  return true;
}

struct FieldCheckReport {
  int samples = 0;
  double gradient_error = 0;     // max relative gap between finite differences of csd and l x + c(x)
  double field_error = 0;        // same against -field / cutoff; only when every weight is 1
  bool field_compared = false;
  double equivariance_error = 0; // max |field(g x) - g field(x)| / (1 + |field(x)|)
  bool ok(double grad_tol = 1e-6, double equi_tol = 1e-12) const {
    return gradient_error <= grad_tol && (!field_compared || field_error <= grad_tol) &&
           equivariance_error <= equi_tol;
  }
};

// Sample points uniform in the ball of the given radius (default R).
inline FieldCheckReport field_checks(const TruncatedModel& m, int samples = 1000, unsigned long long seed = 42,
                                     double radius = -1.0, double step = 1e-5) {
  FieldCheckReport rep;
  rep.samples = samples;
  const std::size_t d = m.dim();
  if (d == 0) return rep;
  if (radius <= 0) radius = m.R();
  bool unit = true;
  for (double w : m.weights()) unit = unit && w == 1.0;
  rep.field_compared = unit;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ur(0.0, 1.0), ang(0.0, 2 * M_PI);
  std::vector<double> x(d), xp(d), g(d), fd(d), f(d), gx(d), fg(d), gf(d);
  for (int s = 0; s < samples; ++s) {
    double nrm = 0;
    for (auto& v : x) {
      v = nd(rng);
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    double r = radius * std::pow(ur(rng), 1.0 / static_cast<double>(d));
    for (auto& v : x) v *= nrm > 0 ? r / nrm : 0.0;
    m.csd_gradient(x, g);
    double gmax = 0, emax = 0;
    for (std::size_t i = 0; i < d; ++i) {
      xp = x;
      xp[i] = x[i] + step;
      double a = m.csd(xp);
      xp[i] = x[i] - step;
      double b = m.csd(xp);
      fd[i] = (a - b) / (2 * step);
      gmax = std::max(gmax, std::abs(g[i]));
    }
    for (std::size_t i = 0; i < d; ++i) emax = std::max(emax, std::abs(fd[i] - g[i]));
    rep.gradient_error = std::max(rep.gradient_error, emax / std::max(gmax, 1e-8));
    m.eval(x, f);
    if (unit) {
      double u = m.cutoff_at(x), e = 0;
      if (u > 0) {
        for (std::size_t i = 0; i < d; ++i) e = std::max(e, std::abs(-f[i] / u - fd[i]));
        rep.field_error = std::max(rep.field_error, e / std::max(gmax, 1e-8));
      }
    }
    double th = ang(rng);
    m.rotate(x, th, gx);
    m.eval(gx, fg);
    m.rotate(f, th, gf);
    double fn = 0, e = 0;
    for (std::size_t i = 0; i < d; ++i) {
      fn = std::max(fn, std::abs(f[i]));
      e = std::max(e, std::abs(fg[i] - gf[i]));
    }
    rep.equivariance_error = std::max(rep.equivariance_error, e / (1.0 + fn));
  }
  return rep;
}

struct ConfinementViolation {
  std::vector<double> start;
  std::string reason;
};

struct ConfinementReport {
  int samples = 0;
  double T = 0;
  std::vector<ConfinementViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Starts are drawn uniformly in radius from the annulus R <= |x| <= 2R. A
// start is a violation when its orbit stays in B(2R) for all of [-T, T]
// without ever entering B(R).
inline ConfinementReport confinement_check(const TruncatedModel& m, int samples, double T,
                                           unsigned long long seed = 1, double tol = 1e-8) {
  require(samples > 0, ErrorCode::InvalidArgument, "samples must be positive");
  ConfinementReport rep;
  rep.samples = samples;
  rep.T = T;
  const std::size_t d = m.dim();
  if (d == 0) return rep;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ur(1.0, 2.0);
  IntegratorOptions opt;
  opt.tol = tol;
  Dopri5<TruncatedModel> ode(m, opt);
  const double R = m.R();
  std::vector<double> x0(d), x(d);
  for (int s = 0; s < samples; ++s) {
    double nrm = 0;
    for (auto& v : x0) {
      v = nd(rng);
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    double r = ur(rng) * R;
    for (auto& v : x0) v *= r / nrm;
    bool left = false, entered = false;
    for (double dir : {1.0, -1.0}) {
      x = x0;
      ode.run(x, dir * T, [&](double, std::span<const double> p) {
        double q = 0;
        for (double v : p) q += v * v;
        q = std::sqrt(q);
        if (q > 2 * R) left = true;
        if (q < R) entered = true;
        return !(left || entered);
      });
      if (left || entered) break;
    }
    if (!left && !entered) rep.violations.push_back({x0, "orbit stays in B(2R) but never enters B(R)"});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Model files.
//
//   swfc-model 1
//   name <identifier>
//   spectrum <path relative to this file>
//   lambda <real>
//   mu <real>
//   R <real>
//   cutoff <inner> <outer>        optional, multiples of R (default 3 4)
//   gamma <i> <j> <k> <value>     zero or more, i <= j <= k

struct ModelFile {
  std::string name = "model";
  std::string spectrum_path;
  double lambda = 0, mu = 0, R = 0;
  CutoffSpec cutoff;
  std::vector<CouplingEntry> gamma;
};

inline ModelFile parse_model_file(const std::string& text, const std::string& source = "<model>") {
  ModelFile mf;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool header = false, has_l = false, has_m = false, has_r = false, has_s = false;
  while (std::getline(is, line)) {
    ++lineno;
    auto s = detail::strip_comment(line);
    if (s.empty()) continue;
    auto tok = detail::split_ws(s);
    std::string where = source + ":" + std::to_string(lineno);
    if (!header) {
      if (tok.size() != 2 || tok[0] != "swfc-model" || tok[1] != "1")
        fail(ErrorCode::Parse, where + ": expected 'swfc-model 1' header");
      header = true;
      continue;
    }
    const auto& k = tok[0];
    auto one = [&]() {
      if (tok.size() != 2) fail(ErrorCode::Parse, where + ": '" + k + "' takes one value");
      return tok[1];
    };
    if (k == "name") {
      mf.name = one();
    } else if (k == "spectrum") {
      mf.spectrum_path = one();
      has_s = true;
    } else if (k == "lambda") {
      mf.lambda = detail::parse_real(one(), where);
      has_l = true;
    } else if (k == "mu") {
      mf.mu = detail::parse_real(one(), where);
      has_m = true;
    } else if (k == "R") {
      mf.R = detail::parse_real(one(), where);
      has_r = true;
    } else if (k == "cutoff") {
      if (tok.size() != 3) fail(ErrorCode::Parse, where + ": cutoff takes inner and outer");
      mf.cutoff.inner = detail::parse_real(tok[1], where);
      mf.cutoff.outer = detail::parse_real(tok[2], where);
    } else if (k == "gamma") {
      if (tok.size() != 5) fail(ErrorCode::Parse, where + ": gamma takes i j k value");
      CouplingEntry e;
      e.i = static_cast<int>(detail::parse_int(tok[1], where));
      e.j = static_cast<int>(detail::parse_int(tok[2], where));
      e.k = static_cast<int>(detail::parse_int(tok[3], where));
      e.value = detail::parse_real(tok[4], where);
      if (!(0 <= e.i && e.i <= e.j && e.j <= e.k)) fail(ErrorCode::Parse, where + ": gamma indices must satisfy 0 <= i <= j <= k");
      mf.gamma.push_back(e);
    } else {
      fail(ErrorCode::Parse, where + ": unknown key '" + k + "'");
    }
  }
  if (!header) fail(ErrorCode::Parse, source + ": empty model file");
  if (!(has_s && has_l && has_m && has_r)) fail(ErrorCode::Parse, source + ": model needs spectrum, lambda, mu and R");
  return mf;
}

inline TruncatedModel build_model(const ModelFile& mf, const Spectrum& spec) {
  SpectralWindow w = truncate(spec, mf.lambda, mf.mu);
  CouplingTensor g(w.total_dim);
  for (const auto& e : mf.gamma) {
    if (e.k >= w.total_dim) fail(ErrorCode::Parse, "gamma index exceeds window dimension");
    if (g.get(e.i, e.j, e.k) != 0.0) fail(ErrorCode::Parse, "duplicate gamma entry");
    g.set(e.i, e.j, e.k, e.value);
  }
  TruncatedModel m(spec, mf.lambda, mf.mu, mf.R, g, mf.cutoff, BumpSpec::polynomial(), mf.name);
  if (!is_equivariant(m)) fail(ErrorCode::InvalidArgument, "coupling tensor is not S^1-equivariant");
  return m;
}

inline TruncatedModel load_model(const std::string& path) {
  auto mf = parse_model_file(detail::read_file(path), path);
  std::filesystem::path sp = mf.spectrum_path;
  if (sp.is_relative()) sp = std::filesystem::path(path).parent_path() / sp;
  return build_model(mf, load_spectrum(sp.string()));
}

inline std::string write_model_file(const ModelFile& mf) {
  std::ostringstream os;
  os << "swfc-model 1\n";
  os << "name " << mf.name << "\n";
  os << "spectrum " << mf.spectrum_path << "\n";
  os << "lambda " << format_real(mf.lambda) << "\n";
  os << "mu " << format_real(mf.mu) << "\n";
  os << "R " << format_real(mf.R) << "\n";
  os << "cutoff " << format_real(mf.cutoff.inner) << " " << format_real(mf.cutoff.outer) << "\n";
  for (const auto& e : mf.gamma) os << "gamma " << e.i << " " << e.j << " " << e.k << " " << format_real(e.value) << "\n";
  return os.str();
}

}  // namespace swfc
