#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "swfc/error.hpp"
#include "swfc/homology.hpp"
#include "swfc/spectrum.hpp"

namespace swfc {

// ---------------------------------------------------------------------------
// Paths of spectra and branch matching.

struct SpectrumPath {
  std::vector<double> times;
  std::vector<Spectrum> spectra;
  double tolerance = 1e-6;

  std::size_t size() const { return times.size(); }

  void validate() const {
    require(times.size() == spectra.size(), ErrorCode::InvalidArgument, "times and spectra differ in length");
    require(times.size() >= 1, ErrorCode::InvalidArgument, "a path needs at least one sample");
    require(tolerance >= 0, ErrorCode::InvalidArgument, "tolerance must be nonnegative");
    for (std::size_t i = 1; i < times.size(); ++i)
      require(times[i] > times[i - 1], ErrorCode::InvalidArgument, "sample times must increase");
  }

  // Runs this path, then `next`, on [0, 1]; the shared endpoint is kept once.
  SpectrumPath concat(const SpectrumPath& next) const {
    validate();
    next.validate();
    SpectrumPath out;
    out.tolerance = std::max(tolerance, next.tolerance);
    auto rescale = [](const SpectrumPath& p, double a, double b, std::size_t skip, SpectrumPath& o) {
      const double t0 = p.times.front(), t1 = p.times.back();
      for (std::size_t i = skip; i < p.size(); ++i) {
        double u = t1 > t0 ? (p.times[i] - t0) / (t1 - t0) : 0.0;
        o.times.push_back(a + (b - a) * u);
        o.spectra.push_back(p.spectra[i]);
      }
    };
    rescale(*this, 0.0, 0.5, 0, out);
    rescale(next, 0.5, 1.0, 1, out);
    return out;
  }

  SpectrumPath reversed() const {
    SpectrumPath out;
    out.tolerance = tolerance;
    for (std::size_t i = size(); i-- > 0;) {
      out.times.push_back(1.0 - times[i]);
      out.spectra.push_back(spectra[i]);
    }
    return out;
  }
};

// One eigenvalue line: values per sample, sector, weight (complex or real dim 1).
struct Branch {
  Sector sector = Sector::Spinor;
  std::vector<double> values;
};

namespace detail {

inline std::vector<double> expanded_values(const Spectrum& s, Sector sec) {
  std::vector<double> v;
  for (const auto& m : s.modes())
    if (m.sector == sec)
      for (int r = 0; r < m.multiplicity; ++r) v.push_back(m.value);
  return v;
}

// Greedy nearest-value matching of a -> b. Throws when two distinct
// assignments are within tol of each other in total displacement.
inline std::vector<std::size_t> greedy_match(const std::vector<double>& a, const std::vector<double>& b, double tol,
                                             const std::string& where) {
  if (a.size() != b.size())
    fail(ErrorCode::AmbiguousMatching, where + ": branch count changes from " + std::to_string(a.size()) + " to " +
                                           std::to_string(b.size()));
  const std::size_t n = a.size();
  struct Cand {
    double d;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  cands.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cands.push_back({std::abs(a[i] - b[j]), i, j});
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.d < y.d; });
  std::vector<std::size_t> to(n, n);
  std::vector<char> used(n, 0);
  const double same = 1e-12;
  for (const auto& c : cands) {
    if (to[c.i] != n || used[c.j]) continue;
    for (const auto& o : cands) {
      if (o.d > c.d + tol) break;
      if (to[o.i] != n || used[o.j] || o.i == c.i || o.j == c.j) continue;
      if (std::abs(a[o.i] - a[c.i]) <= same || std::abs(b[o.j] - b[c.j]) <= same) continue;
      double swapped = std::abs(a[c.i] - b[o.j]) + std::abs(a[o.i] - b[c.j]);
      if (swapped <= c.d + o.d + tol && swapped >= c.d + o.d - tol) {
        std::ostringstream os;
        os << where << ": values " << a[c.i] << " and " << a[o.i] << " match " << b[c.j] << " and " << b[o.j]
           << " equally well within tolerance " << tol;
        fail(ErrorCode::AmbiguousMatching, os.str());
      }
    }
    to[c.i] = c.j;
    used[c.j] = 1;
  }
  return to;
}

}  // namespace detail

inline std::vector<Branch> match_branches(const SpectrumPath& path) {
  path.validate();
  std::vector<Branch> out;
  for (Sector sec : {Sector::Form, Sector::Spinor}) {
    auto cur = detail::expanded_values(path.spectra[0], sec);
    std::vector<Branch> br(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k) br[k] = {sec, {cur[k]}};
    std::vector<std::size_t> slot(cur.size());  // branch held at position k
    for (std::size_t k = 0; k < slot.size(); ++k) slot[k] = k;
    for (std::size_t i = 1; i < path.size(); ++i) {
      auto next = detail::expanded_values(path.spectra[i], sec);
      std::ostringstream where;
      where << to_string(sec) << " samples t=" << path.times[i - 1] << " -> t=" << path.times[i];
      auto to = detail::greedy_match(cur, next, path.tolerance, where.str());
      std::vector<std::size_t> nslot(next.size());
      for (std::size_t k = 0; k < cur.size(); ++k) {
        br[slot[k]].values.push_back(next[to[k]]);
        nslot[to[k]] = slot[k];
      }
      slot = std::move(nslot);
      cur = std::move(next);
    }
    for (auto& b : br) out.push_back(std::move(b));
  }
  return out;
}

// Upward minus downward crossings of -epsilon by one sampled line.
inline int branch_crossings(const std::vector<double>& v, double epsilon) {
  const double level = -epsilon;
  int c = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i] - level) <= 1e-12 * std::max(1.0, std::abs(level)))
      fail(ErrorCode::CrossingOnEndpoint, "a sampled eigenvalue sits on the level " + format_real(level));
    if (i == 0) continue;
    if (v[i - 1] < level && v[i] > level) ++c;
    if (v[i - 1] > level && v[i] < level) --c;
  }
  return c;
}

struct SpectralFlowResult {
  int spinor = 0;  // the spectral flow, in complex dimensions
  int form = 0;    // crossings of form-sector lines (zero for a *d path without kernel)
};

inline SpectralFlowResult spectral_flow_detail(const SpectrumPath& path, double epsilon) {
  require(epsilon > 0, ErrorCode::InvalidArgument, "epsilon must be positive");
  SpectralFlowResult r;
  for (const auto& b : match_branches(path)) (b.sector == Sector::Spinor ? r.spinor : r.form) += branch_crossings(b.values, epsilon);
  return r;
}

inline int spectral_flow(const SpectrumPath& path, double epsilon) { return spectral_flow_detail(path, epsilon).spinor; }

// Half the smallest distance from 0 to a negative spinor value at either endpoint.
inline double default_epsilon(const SpectrumPath& path) {
  path.validate();
  double g = std::numeric_limits<double>::infinity();
  for (const Spectrum* s : {&path.spectra.front(), &path.spectra.back()})
    for (const auto& m : s->modes())
      if (m.sector == Sector::Spinor && m.value < 0) g = std::min(g, -m.value);
  return std::isfinite(g) ? 0.5 * g : 0.5;
}

// Complex dimension of spinor modes in (lambda, 0].
inline int n_lambda(const Spectrum& s, double lambda) {
  int n = 0;
  for (const auto& m : s.modes())
    if (m.sector == Sector::Spinor && m.value > lambda && m.value <= 0) n += m.multiplicity;
  return n;
}

// ---------------------------------------------------------------------------
// Eta invariant.

struct EtaOptions {
  std::vector<double> s_grid{0.5, 0.25, 0.125};
  std::optional<Sector> sector;        // restrict to one sector
  std::optional<double> truncation;    // overrides the spectrum's own
  double smoothing_fraction = 1.0 / 6.0;
  double tolerance = 1e-2;
};

struct EtaResult {
  double value = 0;
  double error = 0;
  std::vector<double> partial;  // smoothed sums on the s grid
  bool smoothed = false;
};

// Sum of sign(v)|v|^-s over nonzero modes. A truncated spectrum gets a
// Gaussian taper of width smoothing_fraction * truncation.
inline double eta_partial_sum(const Spectrum& spec, double s, const EtaOptions& opt = {}) {
  std::optional<double> cut = opt.truncation ? opt.truncation : spec.info().truncation;
  const double L = cut ? opt.smoothing_fraction * *cut : 0.0;
  double sum = 0, comp = 0;
  for (const auto& m : spec.modes()) {
    if (m.value == 0.0) continue;
    if (opt.sector && m.sector != *opt.sector) continue;
    const double a = std::abs(m.value);
    double t = (m.value > 0 ? 1.0 : -1.0) * m.multiplicity * std::pow(a, -s);
    if (cut) t *= std::exp(-(a / L) * (a / L));
    double y = t - comp;  // Kahan
    double u = sum + y;
    comp = (u - sum) - y;
    sum = u;
  }
  return sum;
}

inline double richardson_at_zero(const std::vector<double>& s, const std::vector<double>& y) {
  double v = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double w = 1;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (j != i) w *= s[j] / (s[j] - s[i]);
    v += w * y[i];
  }
  return v;
}

inline EtaResult eta_invariant(const Spectrum& spec, const EtaOptions& opt = {}) {
  require(opt.s_grid.size() >= 2, ErrorCode::InvalidArgument, "s grid needs at least two points");
  for (std::size_t i = 0; i < opt.s_grid.size(); ++i) {
    require(opt.s_grid[i] > 0, ErrorCode::InvalidArgument, "s grid values must be positive");
    for (std::size_t j = 0; j < i; ++j)
      require(opt.s_grid[i] != opt.s_grid[j], ErrorCode::InvalidArgument, "s grid values must be distinct");
  }
  std::optional<double> cut = opt.truncation ? opt.truncation : spec.info().truncation;
  if (cut) {
    require(*cut > 0, ErrorCode::InvalidArgument, "truncation must be positive");
    for (const auto& m : spec.modes())
      require(std::abs(m.value) <= *cut * (1 + 1e-12), ErrorCode::InvalidArgument,
              "a mode lies beyond the declared truncation");
  }
  EtaResult r;
  r.smoothed = cut.has_value();
  for (double s : opt.s_grid) r.partial.push_back(eta_partial_sum(spec, s, opt));
  r.value = richardson_at_zero(opt.s_grid, r.partial);

  // Lower-order extrapolant from the points nearest 0.
  std::vector<std::size_t> idx(opt.s_grid.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return opt.s_grid[a] < opt.s_grid[b]; });
  std::vector<double> s2, y2;
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    s2.push_back(opt.s_grid[idx[k]]);
    y2.push_back(r.partial[idx[k]]);
  }
  r.error = std::abs(r.value - richardson_at_zero(s2, y2));
  if (!(r.error <= opt.tolerance) || !std::isfinite(r.value)) {
    std::ostringstream os;
    os << "extrapolants disagree by " << r.error << " (tolerance " << opt.tolerance << ")";
    fail(ErrorCode::ExtrapolationDiverged, os.str());
  }
  return r;
}

// Complex dimension of the Dirac kernel.
inline int dirac_kernel(const Spectrum& spec) {
  int k = 0;
  for (const auto& m : spec.modes())
    if (m.sector == Sector::Spinor && m.value == 0.0) k += m.multiplicity;
  return k;
}

// ---------------------------------------------------------------------------
// The correction term n = (eta_dir - k - eta_sign / 4) / 2 on the lattice (1/8N)Z.

struct NInvariant {
  Rational value{0};
  double raw = 0;
  double distance = 0;
};

struct NOptions {
  double tolerance = 1e-3;
  bool integral = false;
};

inline NInvariant n_invariant(double eta_dir, long long k_dirac, double eta_sign, int N, const NOptions& opt = {}) {
  require(N >= 1, ErrorCode::InvalidArgument, "N must be at least 1");
  require(std::isfinite(eta_dir) && std::isfinite(eta_sign), ErrorCode::InvalidArgument, "eta values must be finite");
  NInvariant r;
  r.raw = 0.5 * (eta_dir - static_cast<double>(k_dirac) - eta_sign / 4.0);
  const long long q = 8LL * N;
  const double scaled = r.raw * static_cast<double>(q);
  require(std::abs(scaled) < 1e15, ErrorCode::InvalidArgument, "value out of range");
  const long long p = std::llround(scaled);
  r.value = Rational(p, q);
  r.distance = std::abs(r.raw - static_cast<double>(p) / static_cast<double>(q));
  if (r.distance > opt.tolerance) {
    std::ostringstream os;
    os << "n = " << r.raw << " is " << r.distance << " from (1/" << q << ")Z";
    fail(ErrorCode::NotNearLattice, os.str());
  }
  if (opt.integral && r.value.denominator() != 1)
    fail(ErrorCode::NotNearLattice, "n = " + format_rational(r.value) + " is not an integer");
  return r;
}

// ---------------------------------------------------------------------------
// n1 - n0 = SF = n_{lambda,0} - n_{lambda,1}.

struct SfConsistency {
  Rational dn{0};
  int sf = 0;
  int count_difference = 0;
  int form_crossings = 0;
  int n_lambda_start = 0, n_lambda_end = 0;
  double epsilon = 0, lambda = 0;
  std::vector<std::string> violations;
  bool holds() const { return violations.empty(); }
};

inline SfConsistency sf_consistency(const SpectrumPath& path, Rational n0, Rational n1,
                                    std::optional<double> epsilon = std::nullopt,
                                    std::optional<double> lambda = std::nullopt) {
  SfConsistency r;
  r.epsilon = epsilon ? *epsilon : default_epsilon(path);
  auto flow = spectral_flow_detail(path, r.epsilon);
  r.sf = flow.spinor;
  r.form_crossings = flow.form;
  if (lambda) {
    r.lambda = *lambda;
  } else {
    double lo = 0;
    for (const auto& s : path.spectra)
      for (const auto& m : s.modes()) lo = std::min(lo, m.value);
    r.lambda = lo - 1.0;
  }
  r.n_lambda_start = n_lambda(path.spectra.front(), r.lambda);
  r.n_lambda_end = n_lambda(path.spectra.back(), r.lambda);
  r.count_difference = r.n_lambda_start - r.n_lambda_end;
  r.dn = n1 - n0;
  if (r.dn != Rational(r.sf))
    r.violations.push_back("n1 - n0 = " + format_rational(r.dn) + " but SF = " + std::to_string(r.sf));
  if (r.count_difference != r.sf)
    r.violations.push_back("n_lambda,0 - n_lambda,1 = " + std::to_string(r.count_difference) + " but SF = " +
                           std::to_string(r.sf));
  if (r.form_crossings != 0)
    r.violations.push_back("form-sector lines cross -epsilon " + std::to_string(r.form_crossings) + " times");
  return r;
}

inline std::string sf_consistency_csv(const SfConsistency& r) {
  std::ostringstream os;
  os << "quantity,value\n";
  os << "epsilon," << format_real(r.epsilon) << "\n";
  os << "lambda," << format_real(r.lambda) << "\n";
  os << "spectral_flow," << r.sf << "\n";
  os << "n1_minus_n0," << format_rational(r.dn) << "\n";
  os << "n_lambda_start," << r.n_lambda_start << "\n";
  os << "n_lambda_end," << r.n_lambda_end << "\n";
  os << "count_difference," << r.count_difference << "\n";
  os << "form_crossings," << r.form_crossings << "\n";
  os << "holds," << (r.holds() ? "true" : "false") << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Path files.
//
//   tolerance <real>          optional matching tolerance
//   name / N / gap lines      shared by all samples
//   sample <t>                starts a spectrum at time t
//   mode <value> <mult> <sector>

inline SpectrumPath parse_path(const std::string& text, const std::string& source = "<path>") {
  SpectrumPath p;
  detail::SpectrumReader rd;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool in_sample = false;
  auto flush = [&]() {
    if (!in_sample) return;
    p.spectra.emplace_back(rd.modes, rd.info);
    rd.reset_modes();
  };
  while (std::getline(is, line)) {
    ++lineno;
    auto s = detail::strip_comment(line);
    if (s.empty()) continue;
    auto tok = detail::split_ws(s);
    std::string where = source + ":" + std::to_string(lineno);
    if (tok[0] == "sample") {
      if (tok.size() != 2) fail(ErrorCode::Parse, where + ": sample takes a time");
      flush();
      double t = detail::parse_real(tok[1], where);
      if (!p.times.empty() && !(t > p.times.back())) fail(ErrorCode::Parse, where + ": sample times must increase");
      p.times.push_back(t);
      in_sample = true;
    } else if (tok[0] == "tolerance") {
      if (in_sample || tok.size() != 2) fail(ErrorCode::Parse, where + ": tolerance belongs in the header, one value");
      p.tolerance = detail::parse_real(tok[1], where);
      if (p.tolerance < 0) fail(ErrorCode::Parse, where + ": tolerance must be nonnegative");
    } else if (tok[0] == "mode") {
      if (!in_sample) fail(ErrorCode::Parse, where + ": mode before the first sample");
      rd.consume(tok, where);
    } else {
      if (in_sample) fail(ErrorCode::Parse, where + ": header line after the first sample");
      if (!rd.consume(tok, where)) fail(ErrorCode::Parse, where + ": unknown key '" + tok[0] + "'");
    }
  }
  flush();
  if (p.times.empty()) fail(ErrorCode::Parse, source + ": no samples");
  return p;
}

inline SpectrumPath load_path(const std::string& path) { return parse_path(detail::read_file(path), path); }

inline std::string write_path(const SpectrumPath& p) {
  std::ostringstream os;
  os << "tolerance " << format_real(p.tolerance) << "\n";
  if (!p.spectra.empty()) {
    const auto& info = p.spectra.front().info();
    os << "name " << info.name << "\nN " << info.N << "\n";
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    os << "sample " << format_real(p.times[i]) << "\n";
    for (const auto& m : p.spectra[i].modes())
      os << "mode " << format_real(m.value) << " " << m.multiplicity << " " << to_string(m.sector) << "\n";
  }
  return os.str();
}

}  // namespace swfc
