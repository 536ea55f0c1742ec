#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "swfc/conley.hpp"
#include "swfc/cubical.hpp"
#include "swfc/error.hpp"
#include "swfc/homology.hpp"
#include "swfc/swflow.hpp"

namespace swfc {

using MapProvider = std::function<MultivaluedMap(const TruncatedModel&, const CubicalSet&, const FlowMapOptions&)>;

struct GridSpec {
  int cubes_per_side = 16;  // across the box [-2R, 2R]^d
  FlowMapOptions flow;
  MapProvider map_provider;  // e.g. a disk cache; defaults to flow_map_outer
  IndexPairOptions pair;
  bool allow_shortcut = true;
  CubeIndex budget = kDefaultGridBudget;
  Coefficients coefficients = Coefficients::Integers;
};

struct PipelineStats {
  double h = 0, T = 0, bloat = 0;
  std::size_t domain = 0, invariant = 0, N = 0, L = 0;
  int isolation_margin = 0, collar_width = 0;
};

struct SwfResult {
  GradedGroup raw;
  GradedGroup shifted;
  SpectralWindow window;
  Rational n_invariant{0};
  bool shortcut = false;
  IndexPairCertificate certificate;
  PipelineStats stats;
  std::map<std::string, std::string> provenance;
};

// Degrees moved by an integral offset so that the offset becomes 0.
inline GradedGroup effective(const GradedGroup& g) {
  require(g.offset().denominator() == 1, ErrorCode::InvalidArgument, "offset is not integral");
  return g.shifted(static_cast<int>(-g.offset().numerator()), g.offset());
}

struct GridPipeline {
  CubicalSet A;
  MultivaluedMap F;
  IsolationCertificate isolation;
  IndexPair pair;
};

inline GridPipeline run_grid_pipeline(const TruncatedModel& model, const GridSpec& grid) {
  const std::size_t d = model.dim();
  require(grid.cubes_per_side >= 2, ErrorCode::InvalidArgument, "need at least two cubes per side");
  const double r = 2.0 * model.R();
  Box box{std::vector<double>(d, -r), std::vector<double>(d, r)};
  GridFrame frame = frame_for_box(box, 2.0 * r / grid.cubes_per_side, grid.budget);
  GridPipeline p;
  p.A = ball_cubes(frame, r);
  p.F = grid.map_provider ? grid.map_provider(model, p.A, grid.flow) : flow_map_outer(model, p.A, grid.flow);
  p.isolation = isolating_check(p.F, p.A);
  if (!p.isolation.ok) fail(ErrorCode::IsolationFailure, "the invariant part of ball(2R) touches its boundary collar");
  CubicalSet empty(frame);
  p.pair = index_pair(p.F, p.A, empty, empty, grid.pair);
  return p;
}

inline SwfResult swf_homology(const TruncatedModel& model, const GridSpec& grid, Rational n_invariant) {
  SwfResult res;
  res.window = model.window();
  res.n_invariant = n_invariant;
  const MorseIndex mi = reducible_morse_index(res.window);
  if (model.dim() == 0) {
    res.raw = GradedGroup::sphere(0);
    res.shortcut = true;
  } else if (grid.allow_shortcut && model.gapped_shortcut_applies()) {
    // The only zero in ball(2R) is the hyperbolic point 0: its index is a sphere of dimension V^0.
    res.raw = GradedGroup::sphere(mi.total());
    res.shortcut = true;
  } else {
    auto p = run_grid_pipeline(model, grid);
    res.raw = relative_homology(p.pair.N, p.pair.L, static_cast<int>(model.dim()), grid.coefficients);
    res.certificate = p.pair.certificate;
    res.stats = {p.A.frame().h, p.F.T(), p.F.bloat(), p.A.size(), p.pair.S.size(), p.pair.N.size(), p.pair.L.size(),
                 p.isolation.margin, p.pair.collar_width};
  }
  if (res.shortcut) res.certificate = {true, true, true};
  res.shifted = res.raw.shifted(mi.total(), Rational(2) * n_invariant);
  auto& pv = res.provenance;
  pv["model"] = model.name();
  pv["dimension"] = std::to_string(model.dim());
  pv["m"] = std::to_string(mi.m);
  pv["n"] = std::to_string(mi.n);
  pv["n_invariant"] = format_rational(n_invariant);
  pv["shortcut"] = res.shortcut ? "true" : "false";
  pv["cubes_per_side"] = std::to_string(grid.cubes_per_side);
  if (!res.shortcut) {
    pv["h"] = format_real(res.stats.h);
    pv["T"] = format_real(res.stats.T);
    pv["bloat"] = format_real(res.stats.bloat);
  }
  return res;
}

// Homology of the index of the flow restricted to the S^1-fixed subspace.
inline GradedGroup fixed_point_index(const TruncatedModel& model, const GridSpec& grid) {
  auto fixed = model.form_part();
  return swf_homology(fixed, grid, Rational(0)).raw;
}

struct WindowSpec {
  double lambda, mu;
};

struct CutoffComparison {
  SwfResult first, second;
  std::vector<std::string> discrepancies;
  bool identical() const { return discrepancies.empty(); }
};

inline std::vector<std::string> compare_groups(const GradedGroup& a, const GradedGroup& b) {
  std::vector<std::string> out;
  std::vector<int> degs;
  for (auto& [d, g] : a.groups()) degs.push_back(d);
  for (auto& [d, g] : b.groups()) degs.push_back(d);
  std::sort(degs.begin(), degs.end());
  degs.erase(std::unique(degs.begin(), degs.end()), degs.end());
  for (int d : degs)
    if (!(a.at(d) == b.at(d))) {
      std::ostringstream os;
      os << "degree " << d << ": rank " << a.rank(d) << " vs " << b.rank(d);
      if (a.torsion(d) != b.torsion(d)) os << ", torsion differs";
      out.push_back(os.str());
    }
  if (a.offset() != b.offset())
    out.push_back("offset " + format_rational(a.offset()) + " vs " + format_rational(b.offset()));
  return out;
}

inline CutoffComparison cutoff_independence(const TruncatedModel& base, WindowSpec w1, WindowSpec w2,
                                            const GridSpec& grid, Rational n_invariant) {
  CutoffComparison c;
  c.first = swf_homology(base.restricted(w1.lambda, w1.mu), grid, n_invariant);
  c.second = swf_homology(base.restricted(w2.lambda, w2.mu), grid, n_invariant);
  c.discrepancies = compare_groups(c.first.shifted, c.second.shifted);
  return c;
}

// ---------------------------------------------------------------------------
// Splitting S by CSD level: S_{<=0} attractor with dual repeller S^irr_{>0},
// then S^irr_{<=0} attractor inside S_{<=0} with dual repeller Theta.

struct Decomposition {
  GradedGroup I_S, I_S_le0, I_irr_gt0, I_irr_le0, I_theta;
  LesReport first_sequence, second_sequence;
  AttractorRepeller first, second;
  double first_level = 0, second_level = 0;
  std::vector<MorseSet> morse;
  int theta = -1;  // index into morse
  int theta_sphere_degree = 0;
  bool theta_is_sphere = false;
  bool certified = false;
  bool irreducible_quotient_available = false;  // the S^1 quotient of S^irr is not computed
};

inline Decomposition decompose(const TruncatedModel& model, const GridSpec& grid, double epsilon) {
  if (!(epsilon > 0)) fail(ErrorCode::NotGoodPerturbation, "epsilon must be positive");
  require(model.dim() > 0, ErrorCode::InvalidArgument, "decomposition needs a nonempty window");
  auto p = run_grid_pipeline(model, grid);
  const GridFrame& f = p.A.frame();
  auto range = sampled_range(f, [&](std::span<const double> x) { return model.csd(x); });
  auto critical = may_contain_zero(f, model, grid.flow.lipschitz_factor);
  Decomposition dec;
  dec.morse = morse_sets(p.F, p.pair.S, range, critical);

  // Theta: the Morse set holding a cube whose closure contains the origin.
  auto touches_origin = [&](CubeIndex c) {
    std::vector<int> m(f.dim());
    f.multi(c, m.data());
    for (std::size_t k = 0; k < f.dim(); ++k) {
      double a = f.origin[k] + f.h * m[k], b = a + f.h;
      if (a > 1e-12 || b < -1e-12) return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < dec.morse.size(); ++i)
    for (auto c : dec.morse[i].cubes)
      if (touches_origin(c)) dec.theta = static_cast<int>(i);
  require(dec.theta >= 0, ErrorCode::ConstructionFailure, "no Morse set contains the reducible");
  const MorseSet& th = dec.morse[dec.theta];

  double lb = std::max(0.0, th.hi), ub = epsilon;
  for (std::size_t i = 0; i < dec.morse.size(); ++i) {
    if (static_cast<int>(i) == dec.theta) continue;
    const auto& ms = dec.morse[i];
    if (ms.hi > 0 && ms.lo < epsilon) {
      std::ostringstream os;
      os << "a critical set has CSD range [" << ms.lo << ", " << ms.hi << "] meeting (0, " << epsilon << ")";
      fail(ErrorCode::NotGoodPerturbation, os.str());
    }
  }
  if (!(lb < ub)) fail(ErrorCode::NotGoodPerturbation, "the reducible's CSD range reaches epsilon; refine the grid");
  dec.first_level = 0.5 * (lb + ub);
  dec.first = split_index_pair(p.F, p.pair, range, dec.first_level, critical);

  dec.second_level = th.lo - 1e-9 * std::max(1.0, std::abs(th.lo));
  IndexPair sub;
  sub.N = dec.first.N2;
  sub.L = dec.first.N3;
  sub.S = dec.first.T;
  sub.certificate = dec.first.pair23;
  dec.second = split_index_pair(p.F, sub, range, dec.second_level, critical);

  dec.first_sequence = les_exactness(dec.first.N1, dec.first.N2, dec.first.N3);
  dec.second_sequence = les_exactness(dec.second.N1, dec.second.N2, dec.second.N3);
  dec.I_S = dec.first_sequence.h13;
  dec.I_S_le0 = dec.first_sequence.h23;
  dec.I_irr_gt0 = dec.first_sequence.h12;
  dec.I_irr_le0 = dec.second_sequence.h23;
  dec.I_theta = dec.second_sequence.h12;
  dec.theta_sphere_degree = reducible_morse_index(model.window()).total();
  dec.theta_is_sphere = dec.I_theta.is_sphere(dec.theta_sphere_degree);
  dec.certified = p.pair.certificate.all() && dec.first.all_certified() && dec.second.all_certified();
  return dec;
}

}  // namespace swfc
