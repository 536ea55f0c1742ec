#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "swfc/error.hpp"

namespace swfc {

enum class Sector { Form, Spinor };

inline const char* to_string(Sector s) { return s == Sector::Form ? "form" : "spinor"; }

struct EigenMode {
  double value = 0.0;
  int multiplicity = 1;
  Sector sector = Sector::Form;

  int real_dim() const { return sector == Sector::Spinor ? 2 * multiplicity : multiplicity; }
};

struct SpectrumInfo {
  std::string name = "unnamed";
  int N = 1;
  std::optional<double> gap;
  std::optional<double> truncation;  // |v| cutoff of a truncated infinite spectrum
};

// Ascending by value, Form before Spinor on ties.
inline bool mode_order(const EigenMode& a, const EigenMode& b) {
  if (a.value != b.value) return a.value < b.value;
  return a.sector == Sector::Form && b.sector == Sector::Spinor;
}

class Spectrum {
 public:
  Spectrum() = default;

  Spectrum(std::vector<EigenMode> modes, SpectrumInfo info) : modes_(std::move(modes)), info_(std::move(info)) {
    require(info_.N >= 1, ErrorCode::InvalidArgument, "N must be positive");
    for (std::size_t i = 0; i < modes_.size(); ++i) {
      const auto& m = modes_[i];
      require(std::isfinite(m.value), ErrorCode::InvalidArgument, "eigenvalue must be finite");
      require(m.multiplicity >= 1, ErrorCode::InvalidArgument, "multiplicity must be at least 1");
      require(!(m.sector == Sector::Form && m.value == 0.0), ErrorCode::InvalidArgument,
              "form sector has a zero eigenvalue");
      if (i > 0)
        require(mode_order(modes_[i - 1], m), ErrorCode::InvalidArgument,
                "modes are not strictly ascending at position " + std::to_string(i));
    }
  }

  // Sorts and merges equal (value, sector) pairs into multiplicity.
  static Spectrum normalized(std::vector<EigenMode> modes, SpectrumInfo info) {
    std::stable_sort(modes.begin(), modes.end(), mode_order);
    std::vector<EigenMode> merged;
    for (const auto& m : modes) {
      if (!merged.empty() && merged.back().value == m.value && merged.back().sector == m.sector)
        merged.back().multiplicity += m.multiplicity;
      else
        merged.push_back(m);
    }
    return Spectrum(std::move(merged), std::move(info));
  }

  const std::vector<EigenMode>& modes() const { return modes_; }
  const SpectrumInfo& info() const { return info_; }
  std::size_t size() const { return modes_.size(); }

  double spectral_gap() const {
    if (info_.gap) return *info_.gap;
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < modes_.size(); ++i) {
      double d = modes_[i].value - modes_[i - 1].value;
      if (d > 0) g = std::min(g, d);
    }
    for (const auto& m : modes_)
      if (m.value != 0.0) g = std::min(g, std::abs(m.value));
    return std::isfinite(g) ? g : 1.0;
  }

  // Real dimension of all modes with value in (lo, hi].
  int dimension_in(double lo, double hi) const {
    int d = 0;
    for (const auto& m : modes_)
      if (m.value > lo && m.value <= hi) d += m.real_dim();
    return d;
  }

 private:
  std::vector<EigenMode> modes_;
  SpectrumInfo info_;
};

// One real coordinate of a window. Spinor modes give (re, im) pairs, adjacent.
struct Coordinate {
  std::size_t mode = 0;             // index into the window's mode list
  Sector sector = Sector::Form;
  int component = 0;                // 0 = real part (or form), 1 = imaginary part
  int partner = -1;                 // other half of a complex coordinate
  double eigenvalue = 0.0;
};

struct SpectralWindow {
  double lambda = -1.0;
  double mu = 1.0;
  std::vector<std::size_t> mode_indices;  // positions in the parent spectrum
  std::vector<EigenMode> modes;
  int m = 0;
  int n = 0;
  int total_dim = 0;
  int N = 1;

  std::vector<Coordinate> coordinates() const {
    std::vector<Coordinate> out;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const auto& md = modes[k];
      for (int r = 0; r < md.multiplicity; ++r) {
        if (md.sector == Sector::Form) {
          out.push_back({k, Sector::Form, 0, -1, md.value});
        } else {
          int base = static_cast<int>(out.size());
          out.push_back({k, Sector::Spinor, 0, base + 1, md.value});
          out.push_back({k, Sector::Spinor, 1, base, md.value});
        }
      }
    }
    return out;
  }
};

struct MorseIndex {
  int m = 0;
  int n = 0;
  int total() const { return m + 2 * n; }
};

inline SpectralWindow truncate(const Spectrum& spec, double lambda, double mu, double eps_cut = -1.0) {
  require(lambda < 0.0 && mu > 0.0, ErrorCode::InvalidArgument, "window needs lambda < 0 < mu");
  if (eps_cut < 0.0) eps_cut = 1e-6 * spec.spectral_gap();
  SpectralWindow w;
  w.lambda = lambda;
  w.mu = mu;
  w.N = spec.info().N;
  for (std::size_t i = 0; i < spec.modes().size(); ++i) {
    const auto& md = spec.modes()[i];
    if (std::abs(md.value - lambda) <= eps_cut || std::abs(md.value - mu) <= eps_cut)
      fail(ErrorCode::EigenvalueOnBoundary,
           "eigenvalue " + std::to_string(md.value) + " lies on the window boundary; nudge lambda or mu");
    if (md.value > lambda && md.value <= mu) {
      w.mode_indices.push_back(i);
      w.modes.push_back(md);
      w.total_dim += md.real_dim();
      if (md.value <= 0.0) {
        if (md.sector == Sector::Form)
          w.m += md.multiplicity;
        else
          w.n += md.multiplicity;
      }
    }
  }
  return w;
}

inline MorseIndex reducible_morse_index(const SpectralWindow& w) { return {w.m, w.n}; }

// Smooth bump on (0,1) with unit integral.
struct BumpSpec {
  std::function<double(double)> density;
  std::function<double(double)> cdf;  // optional closed form
  double sup = 0.0;                     // max of density

  static BumpSpec polynomial() {
    BumpSpec b;
    b.density = [](double t) {
      if (t <= 0.0 || t >= 1.0) return 0.0;
      double u = t * (1.0 - t);
      return 30.0 * u * u;
    };
    b.cdf = [](double t) {
      if (t <= 0.0) return 0.0;
      if (t >= 1.0) return 1.0;
      return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    };
    b.sup = 30.0 / 16.0;
    return b;
  }

  double integral(double a, double b) const {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(density, a, b, 15, 1e-14);
  }

  double cumulative(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return cdf ? cdf(t) : integral(0.0, t);
  }

  void validate() const {
    require(static_cast<bool>(density), ErrorCode::InvalidBump, "bump has no density");
    double total = integral(0.0, 1.0);
    if (std::abs(total - 1.0) > 1e-9)
      fail(ErrorCode::InvalidBump, "bump integral is " + std::to_string(total) + ", expected 1");
  }
};

// weight(nu) = int_0^1 beta(t) [lambda + t < nu <= mu - t] dt
inline double projection_weight(double nu, double lambda, double mu, const BumpSpec& beta) {
  if (nu <= lambda || nu > mu) return 0.0;
  double reach = std::min(nu - lambda, mu - nu);
  return beta.cumulative(std::min(reach, 1.0));
}

// Weights per mode of the spectrum, in spectrum order.
inline std::vector<double> projection_weights(const Spectrum& spec, double lambda, double mu,
                                              const BumpSpec& beta = BumpSpec::polynomial()) {
  require(-lambda > 1.0 && mu > 1.0, ErrorCode::InvalidArgument, "projection weights need -lambda, mu > 1");
  beta.validate();
  std::vector<double> w;
  w.reserve(spec.size());
  for (const auto& m : spec.modes()) w.push_back(projection_weight(m.value, lambda, mu, beta));
  return w;
}

// ---------------------------------------------------------------------------
// Spectrum files.
//
//   # comment
//   name <identifier>
//   N <positive integer>
//   gap <real>                      optional
//   truncation <real>               optional, marks a spectrum cut at |v| <= value
//   mode <value> <multiplicity> <form|spinor>
//
// Header lines come before the first mode. Modes must be strictly ascending,
// with Form listed before Spinor when values tie.

namespace detail {

inline std::string strip_comment(const std::string& line) {
  auto p = line.find('#');
  std::string s = p == std::string::npos ? line : line.substr(0, p);
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& tok, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, where + ": expected a real number, got '" + tok + "'");
  }
}

inline long long parse_int(const std::string& tok, const std::string& where) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, where + ": expected an integer, got '" + tok + "'");
  }
}

inline Sector parse_sector(const std::string& tok, const std::string& where) {
  if (tok == "form") return Sector::Form;
  if (tok == "spinor") return Sector::Spinor;
  fail(ErrorCode::Parse, where + ": sector must be 'form' or 'spinor'");
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Parse, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SpectrumReader {
  SpectrumInfo info;
  std::vector<EigenMode> modes;
  bool seen_mode = false;
  bool seen_name = false, seen_n = false;

  // Returns false when the line is not a spectrum line.
  bool consume(const std::vector<std::string>& tok, const std::string& where) {
    const auto& key = tok[0];
    if (key == "mode") {
      if (tok.size() != 4) fail(ErrorCode::Parse, where + ": mode needs value, multiplicity, sector");
      EigenMode m;
      m.value = parse_real(tok[1], where);
      long long mult = parse_int(tok[2], where);
      if (mult < 1) fail(ErrorCode::Parse, where + ": multiplicity must be positive");
      m.multiplicity = static_cast<int>(mult);
      m.sector = parse_sector(tok[3], where);
      if (m.sector == Sector::Form && m.value == 0.0)
        fail(ErrorCode::Parse, where + ": form sector cannot have a zero eigenvalue");
      if (!modes.empty() && !mode_order(modes.back(), m))
        fail(ErrorCode::Parse, where + ": eigenvalues are not ascending");
      modes.push_back(m);
      seen_mode = true;
      return true;
    }
    if (key == "name" || key == "N" || key == "gap" || key == "truncation") {
      if (seen_mode) fail(ErrorCode::Parse, where + ": header line after modes");
      if (tok.size() != 2) fail(ErrorCode::Parse, where + ": '" + key + "' takes one value");
      if (key == "name") {
        if (seen_name) fail(ErrorCode::Parse, where + ": duplicate name");
        info.name = tok[1];
        seen_name = true;
      } else if (key == "N") {
        if (seen_n) fail(ErrorCode::Parse, where + ": duplicate N");
        long long v = parse_int(tok[1], where);
        if (v < 1) fail(ErrorCode::Parse, where + ": N must be positive");
        info.N = static_cast<int>(v);
        seen_n = true;
      } else {
        double g = parse_real(tok[1], where);
        if (g <= 0) fail(ErrorCode::Parse, where + ": " + key + " must be positive");
        (key == "gap" ? info.gap : info.truncation) = g;
      }
      return true;
    }
    return false;
  }

  void reset_modes() {
    modes.clear();
    seen_mode = false;
  }
};

}  // namespace detail

inline Spectrum parse_spectrum(const std::string& text, const std::string& source = "<spectrum>") {
  detail::SpectrumReader rd;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto s = detail::strip_comment(line);
    if (s.empty()) continue;
    auto tok = detail::split_ws(s);
    std::string where = source + ":" + std::to_string(lineno);
    if (!rd.consume(tok, where)) fail(ErrorCode::Parse, where + ": unknown key '" + tok[0] + "'");
  }
  return Spectrum(std::move(rd.modes), std::move(rd.info));
}

inline Spectrum load_spectrum(const std::string& path) { return parse_spectrum(detail::read_file(path), path); }

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string write_spectrum(const Spectrum& s) {
  std::ostringstream os;
  os << "name " << s.info().name << "\n";
  os << "N " << s.info().N << "\n";
  if (s.info().gap) os << "gap " << format_real(*s.info().gap) << "\n";
  if (s.info().truncation) os << "truncation " << format_real(*s.info().truncation) << "\n";
  for (const auto& m : s.modes())
    os << "mode " << format_real(m.value) << " " << m.multiplicity << " " << to_string(m.sector) << "\n";
  return os.str();
}

}  // namespace swfc
