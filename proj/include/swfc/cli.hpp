#pragma once

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "swfc/conley.hpp"
#include "swfc/cubical.hpp"
#include "swfc/error.hpp"
#include "swfc/field.hpp"
#include "swfc/homology.hpp"
#include "swfc/lattice.hpp"
#include "swfc/spectral_flow.hpp"
#include "swfc/spectrum.hpp"
#include "swfc/swf_invariant.hpp"
#include "swfc/swflow.hpp"

namespace swfc {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing.

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Internal, "cannot write " + p.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Manifests.

inline const std::vector<std::string>& manifest_commands() {
  static const std::vector<std::string> c{"swf", "decompose", "cutoff-compare", "sflow", "lattice", "conley-demo"};
  return c;
}

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> inputs;  // absolute paths
  Json parameters = Json::object();
  std::string output_dir;
  std::uint64_t seed = 0;
  int worker_count = 1;
};

namespace detail {

inline void only_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::Parse, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(ErrorCode::Parse, where + ": unknown key '" + it.key() + "'");
}

struct ParameterSpec {
  std::set<std::string> allowed, required;
};

inline const std::map<std::string, ParameterSpec>& parameter_specs() {
  static const std::set<std::string> grid{"cubes_per_side", "T", "time_scale", "coefficients", "grid_budget",
                                          "field_check_samples", "use_cache"};
  auto with = [](std::set<std::string> a, std::initializer_list<std::string> b) {
    a.insert(b.begin(), b.end());
    return a;
  };
  static const std::map<std::string, ParameterSpec> s{
      {"swf", {with(grid, {"n_invariant", "allow_shortcut"}), {}}},
      {"decompose", {with(grid, {"epsilon"}), {"epsilon"}}},
      {"cutoff-compare", {with(grid, {"n_invariant", "allow_shortcut", "windows"}), {"windows"}}},
      {"sflow", {{"n0", "n1", "epsilon", "lambda"}, {}}},
      {"lattice", {{"s", "n", "r_min", "coord_bound", "expect"}, {}}},
      {"conley-demo", {{"example", "dim", "negative", "cubes_per_side", "T", "time_scale", "half_width"}, {"example"}}},
  };
  return s;
}

inline const std::map<std::string, std::set<std::string>>& input_specs() {
  static const std::map<std::string, std::set<std::string>> s{
      {"swf", {"model"}}, {"decompose", {"model"}}, {"cutoff-compare", {"model"}}, {"sflow", {"path"}},
      {"lattice", {}},    {"conley-demo", {}},
  };
  return s;
}

}  // namespace detail

// Input paths are resolved against base_dir; output_dir against the working directory.
inline RunManifest manifest_from_json(const Json& j, const fs::path& base_dir) {
  detail::only_keys(j, {"command", "inputs", "parameters", "output_dir", "seed", "worker_count"}, "manifest");
  for (const char* k : {"command", "output_dir"})
    if (!j.contains(k)) fail(ErrorCode::Parse, std::string("manifest: missing '") + k + "'");
  RunManifest m;
  if (!j["command"].is_string()) fail(ErrorCode::Parse, "manifest: command must be a string");
  m.command = j["command"].get<std::string>();
  const auto& cmds = manifest_commands();
  if (std::find(cmds.begin(), cmds.end(), m.command) == cmds.end())
    fail(ErrorCode::Parse, "manifest: unknown command '" + m.command + "'");
  if (!j["output_dir"].is_string()) fail(ErrorCode::Parse, "manifest: output_dir must be a string");
  m.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) fail(ErrorCode::Parse, "manifest: seed must be a nonnegative integer");
    m.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("worker_count")) {
    if (!j["worker_count"].is_number_integer() || j["worker_count"].get<long long>() < 1)
      fail(ErrorCode::Parse, "manifest: worker_count must be a positive integer");
    m.worker_count = j["worker_count"].get<int>();
  }
  const auto& ispec = detail::input_specs().at(m.command);
  if (j.contains("inputs")) {
    if (!j["inputs"].is_object()) fail(ErrorCode::Parse, "manifest: inputs must be an object");
    for (auto it = j["inputs"].begin(); it != j["inputs"].end(); ++it) {
      if (m.command != "lattice" && !ispec.count(it.key()))
        fail(ErrorCode::Parse, "inputs: unknown key '" + it.key() + "' for " + m.command);
      if (!it.value().is_string()) fail(ErrorCode::Parse, "inputs: '" + it.key() + "' must be a path string");
      fs::path p = it.value().get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      p = p.lexically_normal();
      if (!fs::is_regular_file(p)) fail(ErrorCode::Parse, "inputs: file not found: " + p.string());
      m.inputs[it.key()] = p.string();
    }
  }
  for (const auto& k : ispec)
    if (!m.inputs.count(k)) fail(ErrorCode::Parse, "inputs: missing '" + k + "' for " + m.command);
  if (m.command == "lattice" && m.inputs.empty()) fail(ErrorCode::Parse, "inputs: lattice needs at least one Gram file");
  if (j.contains("parameters")) m.parameters = j["parameters"];
  const auto& pspec = detail::parameter_specs().at(m.command);
  detail::only_keys(m.parameters, pspec.allowed, "parameters");
  for (const auto& k : pspec.required)
    if (!m.parameters.contains(k)) fail(ErrorCode::Parse, "parameters: missing '" + k + "' for " + m.command);
  return m;
}

inline RunManifest parse_manifest(const std::string& text, const fs::path& base_dir,
                                  const std::string& source = "<manifest>") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, source + ": " + e.what());
  }
  return manifest_from_json(j, base_dir);
}

inline RunManifest load_manifest(const std::string& path) {
  fs::path p = fs::absolute(path);
  return parse_manifest(detail::read_file(p.string()), p.parent_path(), p.string());
}

inline Json manifest_to_json(const RunManifest& m) {
  Json j;
  j["command"] = m.command;
  j["inputs"] = Json::object();
  for (auto& [k, v] : m.inputs) j["inputs"][k] = v;
  j["parameters"] = m.parameters;
  j["output_dir"] = m.output_dir;
  j["seed"] = m.seed;
  j["worker_count"] = m.worker_count;
  return j;
}

// Hash of a model file together with the spectrum it references.
inline std::string model_key(const std::string& model_path) {
  std::string content = detail::read_file(model_path);
  auto mf = parse_model_file(content, model_path);
  fs::path sp = mf.spectrum_path;
  if (sp.is_relative()) sp = fs::path(model_path).parent_path() / sp;
  return hex64(fnv1a(content + "\n" + detail::read_file(sp.string())));
}

// Content key of a run: command, input contents, parameters, seed.
inline std::string manifest_key(const RunManifest& m) {
  Json j;
  j["command"] = m.command;
  j["inputs"] = Json::object();
  for (auto& [k, v] : m.inputs) {
    j["inputs"][k] = k == "model" ? model_key(v) : hex64(fnv1a(detail::read_file(v)));
  }
  j["parameters"] = m.parameters;
  j["seed"] = m.seed;
  return hex64(fnv1a(j.dump()));
}

// ---------------------------------------------------------------------------
// Cache of flow maps under <output_dir>/cache, guarded by an advisory lock.

class CacheLock {
 public:
  explicit CacheLock(const fs::path& dir) {
    fs::create_directories(dir);
    fd_ = ::open((dir / ".lock").c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ >= 0) ::flock(fd_, LOCK_EX);
  }
  ~CacheLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  CacheLock(const CacheLock&) = delete;
  CacheLock& operator=(const CacheLock&) = delete;

 private:
  int fd_ = -1;
};

inline fs::path cache_dir(const fs::path& output_dir) { return output_dir / "cache"; }

struct CacheStats {
  int hits = 0, misses = 0;
};

inline MapProvider caching_map_provider(const fs::path& output_dir, const std::string& model_key, CacheStats* stats) {
  return [output_dir, model_key, stats](const TruncatedModel& model, const CubicalSet& A, const FlowMapOptions& opt) {
    std::ostringstream key;
    key << model_key << "|" << model.name() << "|" << format_real(model.window().lambda) << "|"
        << format_real(model.window().mu) << "|" << model.dim() << "|";
    detail::write_frame(key, A.frame());
    key << "|" << A.size() << "|" << format_real(opt.T) << "|" << format_real(opt.time_scale) << "|"
        << format_real(opt.safety) << "|" << format_real(opt.tol) << "|" << format_real(opt.lipschitz_factor);
    const fs::path dir = cache_dir(output_dir);
    const fs::path file = dir / (hex64(fnv1a(key.str())) + ".map");
    {
      CacheLock lock(dir);
      if (fs::is_regular_file(file)) {
        auto F = parse_map(detail::read_file(file.string()), file.string());
        if (F.domain() == A) {
          fs::last_write_time(file, fs::file_time_type::clock::now());
          if (stats) ++stats->hits;
          return F;
        }
      }
    }
    auto F = flow_map_outer(model, A, opt);
    CacheLock lock(dir);
    fs::path tmp = file;
    tmp += ".tmp";
    write_text(tmp, write_map(F));
    fs::rename(tmp, file);
    if (stats) ++stats->misses;
    return F;
  };
}

struct GcReport {
  std::uintmax_t bytes_before = 0, bytes_after = 0;
  std::vector<std::string> evicted;
  std::vector<std::string> kept;
};

// Least recently used entries go first; bundles are never touched.
inline GcReport cache_gc(const fs::path& output_dir, std::uintmax_t max_bytes) {
  GcReport r;
  const fs::path dir = cache_dir(output_dir);
  if (!fs::is_directory(dir)) return r;
  CacheLock lock(dir);
  struct Entry {
    fs::path path;
    fs::file_time_type mtime;
    std::uintmax_t size;
  };
  std::vector<Entry> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".map")
      entries.push_back({e.path(), e.last_write_time(), e.file_size()});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.mtime != b.mtime) return a.mtime < b.mtime;
    return a.path.filename() < b.path.filename();
  });
  for (const auto& e : entries) r.bytes_before += e.size;
  r.bytes_after = r.bytes_before;
  for (const auto& e : entries) {
    if (r.bytes_after > max_bytes) {
      fs::remove(e.path);
      r.bytes_after -= e.size;
      r.evicted.push_back(e.path.filename().string());
    } else {
      r.kept.push_back(e.path.filename().string());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Plots.

inline std::string betti_svg(const std::vector<std::pair<std::string, GradedGroup>>& series, const std::string& title) {
  int lo = 0, hi = 0;
  long long top = 1;
  bool any = false;
  for (const auto& [name, g] : series)
    for (const auto& [d, grp] : g.groups()) {
      lo = any ? std::min(lo, d) : d;
      hi = any ? std::max(hi, d) : d;
      any = true;
      top = std::max(top, grp.rank);
    }
  const int ndeg = hi - lo + 1;
  const int ns = std::max<int>(1, static_cast<int>(series.size()));
  const int W = 80 + ndeg * (ns * 24 + 20), H = 260;
  const double plot_h = 160, base = 210;
  static const char* colors[] = {"#3b6ea8", "#c8553d", "#5a9367", "#8a6fb0", "#d4a017"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"50\" y1=\"" << base << "\" x2=\"" << W - 10 << "\" y2=\"" << base << "\" stroke=\"black\"/>\n";
  os << "<text x=\"10\" y=\"" << base - plot_h << "\" font-family=\"sans-serif\" font-size=\"11\">" << top
     << "</text>\n";
  for (int k = 0; k < ndeg; ++k) {
    const int x0 = 60 + k * (ns * 24 + 20);
    os << "<text x=\"" << x0 << "\" y=\"" << base + 18 << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << "H" << lo + k << "</text>\n";
    for (int s = 0; s < static_cast<int>(series.size()); ++s) {
      long long r = any ? series[s].second.rank(lo + k) : 0;
      double hgt = plot_h * static_cast<double>(r) / static_cast<double>(top);
      os << "<rect x=\"" << x0 + s * 24 << "\" y=\"" << base - hgt << "\" width=\"20\" height=\"" << hgt
         << "\" fill=\"" << colors[s % 5] << "\"/>\n";
    }
  }
  for (int s = 0; s < static_cast<int>(series.size()); ++s)
    os << "<text x=\"" << 60 + s * 130 << "\" y=\"" << H - 10 << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
       << colors[s % 5] << "\">" << series[s].first << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Running.

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parse: return 2;
    case ErrorCode::GridTooLarge:
    case ErrorCode::SearchSpaceTooLarge:
      return 3;
    case ErrorCode::IsolationFailure:
    case ErrorCode::HypothesisViolationI:
    case ErrorCode::HypothesisViolationII:
    case ErrorCode::ConstructionFailure:
    case ErrorCode::NotRegularLevel:
    case ErrorCode::NotGoodPerturbation:
      return 4;
    default: return 5;
  }
}

struct RunResult {
  int exit_code = 0;
  std::string error_code;  // ErrorCode name, empty on success
  std::string message;
  fs::path bundle;
  std::string summary;
  CacheStats cache;
  double seconds = 0;
  bool checks_passed = false;
};

namespace detail {

struct Outputs {
  std::string homology_csv;
  Json certificate = Json::object();
  std::vector<std::pair<std::string, GradedGroup>> plot;
  std::string summary;
  std::map<std::string, std::string> extra_files;
  Json results = Json::object();
  bool ok = true;  // a report-valued command can finish with a failed check
};

template <class T>
T param(const Json& p, const std::string& k, T dflt) {
  if (!p.contains(k)) return dflt;
  try {
    return p.at(k).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::Parse, "parameters: '" + k + "' has the wrong type");
  }
}

inline Rational rational_param(const Json& p, const std::string& k, Rational dflt) {
  if (!p.contains(k)) return dflt;
  const auto& v = p.at(k);
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (!v.is_string()) fail(ErrorCode::Parse, "parameters: '" + k + "' must be an integer or a 'p/q' string");
  try {
    return parse_rational(v.get<std::string>());
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, "parameters: '" + k + "' is not a rational");
  }
}

inline GridSpec grid_from(const Json& p, const RunManifest& m) {
  GridSpec g;
  g.cubes_per_side = param<int>(p, "cubes_per_side", 16);
  g.flow.T = param<double>(p, "T", 0.0);
  g.flow.time_scale = param<double>(p, "time_scale", 8.0);
  g.flow.workers = static_cast<unsigned>(m.worker_count);
  g.budget = param<long long>(p, "grid_budget", kDefaultGridBudget);
  std::string c = param<std::string>(p, "coefficients", "Z");
  if (c == "Z")
    g.coefficients = Coefficients::Integers;
  else if (c == "Z2")
    g.coefficients = Coefficients::Z2;
  else
    fail(ErrorCode::Parse, "parameters: coefficients must be 'Z' or 'Z2'");
  return g;
}

// n from a rational or from {eta_dir, k_dirac, eta_sign}.
inline Rational n_from(const Json& p, int N) {
  if (!p.contains("n_invariant")) return Rational(0);
  const auto& v = p.at("n_invariant");
  if (v.is_object()) {
    only_keys(v, {"eta_dir", "k_dirac", "eta_sign", "integral"}, "parameters.n_invariant");
    auto n = n_invariant(param<double>(v, "eta_dir", 0.0), param<long long>(v, "k_dirac", 0),
                         param<double>(v, "eta_sign", 0.0), N, {1e-3, param<bool>(v, "integral", false)});
    return n.value;
  }
  return rational_param(p, "n_invariant", Rational(0));
}

inline Json certificate_object(const IndexPairCertificate& c) {
  return Json{{"cond1", c.cond1}, {"cond2", c.cond2}, {"cond3", c.cond3}};
}

inline Json stats_object(const PipelineStats& s) {
  return Json{{"h", s.h},         {"T", s.T},
              {"bloat", s.bloat}, {"domain_cubes", s.domain},
              {"invariant_cubes", s.invariant}, {"N_cubes", s.N},
              {"L_cubes", s.L},   {"isolation_margin", s.isolation_margin},
              {"collar_width", s.collar_width}};
}

inline Json field_check_object(const FieldCheckReport& r) {
  return Json{{"samples", r.samples},
              {"gradient_error", r.gradient_error},
              {"field_error", r.field_error},
              {"field_compared", r.field_compared},
              {"equivariance_error", r.equivariance_error},
              {"ok", r.ok()}};
}

inline MapProvider provider_for(const RunManifest& m, const std::string& model_key, CacheStats* stats) {
  if (!param<bool>(m.parameters, "use_cache", true)) return nullptr;
  return caching_map_provider(fs::path(m.output_dir), model_key, stats);
}

inline Outputs run_swf(const RunManifest& m, CacheStats* stats) {
  const auto& p = m.parameters;
  auto model = load_model(m.inputs.at("model"));
  GridSpec g = grid_from(p, m);
  g.allow_shortcut = param<bool>(p, "allow_shortcut", true);
  g.map_provider = provider_for(m, model_key(m.inputs.at("model")), stats);
  Rational n = n_from(p, model.window().N);
  auto fc = field_checks(model, param<int>(p, "field_check_samples", 1000), m.seed);
  auto res = swf_homology(model, g, n);
  Outputs o;
  o.homology_csv = res.shifted.csv();
  o.extra_files["raw_homology.csv"] = res.raw.csv();
  o.certificate["index_pair"] = certificate_object(res.certificate);
  o.certificate["shortcut"] = res.shortcut;
  o.certificate["stats"] = stats_object(res.stats);
  o.certificate["field_checks"] = field_check_object(fc);
  o.plot = {{"raw", res.raw}, {"shifted", res.shifted}};
  auto eff = effective(res.shifted);
  o.results = Json{{"raw", res.raw.describe()},
                   {"shifted", res.shifted.describe()},
                   {"offset", format_rational(res.shifted.offset())},
                   {"effective", eff.describe()},
                   {"n_invariant", format_rational(n)},
                   {"m", res.window.m},
                   {"n", res.window.n}};
  std::ostringstream s;
  s << "model " << model.name() << " (dim " << model.dim() << ", m=" << res.window.m << ", n=" << res.window.n << ")\n";
  s << "raw homology: " << res.raw.describe() << "\n";
  s << "shifted homology (desuspended by V^0, offset " << format_rational(res.shifted.offset()) << "):\n"
    << res.shifted.table();
  s << "offset-adjusted: " << eff.describe() << "\n";
  s << "field checks: gradient " << fc.gradient_error << ", equivariance " << fc.equivariance_error << "\n";
  o.summary = s.str();
  o.ok = fc.ok() && res.certificate.all();
  return o;
}

inline Outputs run_decompose(const RunManifest& m, CacheStats* stats) {
  const auto& p = m.parameters;
  auto model = load_model(m.inputs.at("model"));
  GridSpec g = grid_from(p, m);
  g.allow_shortcut = false;
  g.map_provider = provider_for(m, model_key(m.inputs.at("model")), stats);
  double eps = param<double>(p, "epsilon", 0.0);
  auto fc = field_checks(model, param<int>(p, "field_check_samples", 1000), m.seed);
  auto dec = decompose(model, g, eps);
  Outputs o;
  std::ostringstream csv;
  csv << "index,degree,rank,torsion\n";
  std::vector<std::pair<std::string, GradedGroup>> parts{{"S", dec.I_S},
                                                         {"S_le0", dec.I_S_le0},
                                                         {"S_irr_gt0", dec.I_irr_gt0},
                                                         {"S_irr_le0", dec.I_irr_le0},
                                                         {"Theta", dec.I_theta}};
  for (const auto& [name, gg] : parts)
    for (const auto& [d, grp] : gg.groups()) {
      csv << name << "," << d << "," << grp.rank << ",";
      for (std::size_t i = 0; i < grp.torsion.size(); ++i) csv << (i ? ";" : "") << grp.torsion[i];
      csv << "\n";
    }
  o.homology_csv = csv.str();
  auto seq = [](const LesReport& r) {
    return Json{{"exact", r.exact()},
                {"euler_ok", r.euler_ok()},
                {"violations", r.violations()},
                {"chi", Json::array({r.chi13, r.chi23, r.chi12})}};
  };
  o.certificate["first_split"] = Json{{"level", dec.first_level},
                                      {"pair12", certificate_object(dec.first.pair12)},
                                      {"pair13", certificate_object(dec.first.pair13)},
                                      {"pair23", certificate_object(dec.first.pair23)},
                                      {"sequence", seq(dec.first_sequence)}};
  o.certificate["second_split"] = Json{{"level", dec.second_level},
                                       {"pair12", certificate_object(dec.second.pair12)},
                                       {"pair13", certificate_object(dec.second.pair13)},
                                       {"pair23", certificate_object(dec.second.pair23)},
                                       {"sequence", seq(dec.second_sequence)}};
  o.certificate["certified"] = dec.certified;
  o.certificate["theta_is_sphere"] = dec.theta_is_sphere;
  o.certificate["irreducible_quotient_available"] = dec.irreducible_quotient_available;
  o.certificate["field_checks"] = field_check_object(fc);
  Json morse = Json::array();
  for (const auto& ms : dec.morse) morse.push_back(Json{{"cubes", ms.cubes.size()}, {"csd_lo", ms.lo}, {"csd_hi", ms.hi}});
  o.certificate["morse_sets"] = morse;
  o.plot = parts;
  std::ostringstream s;
  s << "model " << model.name() << ", epsilon " << eps << "\n";
  for (const auto& [name, gg] : parts) s << "I(" << name << ") = " << gg.describe() << "\n";
  s << "first sequence exact: " << (dec.first_sequence.exact() ? "yes" : "no")
    << ", second sequence exact: " << (dec.second_sequence.exact() ? "yes" : "no") << "\n";
  s << "I(Theta) is a sphere of dimension " << dec.theta_sphere_degree << ": " << (dec.theta_is_sphere ? "yes" : "no")
    << "\n";
  s << "irreducible S^1-quotient: not computed\n";
  o.summary = s.str();
  for (const auto& [name, gg] : parts) o.results[name] = gg.describe();
  o.ok = dec.certified && dec.first_sequence.exact() && dec.second_sequence.exact() && dec.theta_is_sphere && fc.ok();
  return o;
}

inline Outputs run_cutoff_compare(const RunManifest& m, CacheStats* stats) {
  const auto& p = m.parameters;
  auto model = load_model(m.inputs.at("model"));
  GridSpec g = grid_from(p, m);
  g.allow_shortcut = param<bool>(p, "allow_shortcut", true);
  g.map_provider = provider_for(m, model_key(m.inputs.at("model")), stats);
  const auto& w = p.at("windows");
  if (!w.is_array() || w.size() != 2 || !w[0].is_array() || !w[1].is_array() || w[0].size() != 2 ||
      w[1].size() != 2)
    fail(ErrorCode::Parse, "parameters: windows must be [[lambda1, mu1], [lambda2, mu2]]");
  WindowSpec w1{w[0][0].get<double>(), w[0][1].get<double>()}, w2{w[1][0].get<double>(), w[1][1].get<double>()};
  Rational n = n_from(p, model.window().N);
  auto c = cutoff_independence(model, w1, w2, g, n);
  Outputs o;
  o.homology_csv = c.first.shifted.csv();
  o.extra_files["homology_second.csv"] = c.second.shifted.csv();
  o.certificate["first"] = Json{{"index_pair", certificate_object(c.first.certificate)},
                                {"shortcut", c.first.shortcut},
                                {"stats", stats_object(c.first.stats)}};
  o.certificate["second"] = Json{{"index_pair", certificate_object(c.second.certificate)},
                                 {"shortcut", c.second.shortcut},
                                 {"stats", stats_object(c.second.stats)}};
  o.certificate["identical"] = c.identical();
  o.certificate["discrepancies"] = c.discrepancies;
  o.plot = {{"window 1", c.first.shifted}, {"window 2", c.second.shifted}};
  std::ostringstream s;
  s << "window (" << w1.lambda << ", " << w1.mu << "]: raw " << c.first.raw.describe() << ", shifted "
    << c.first.shifted.describe() << "\n";
  s << "window (" << w2.lambda << ", " << w2.mu << "]: raw " << c.second.raw.describe() << ", shifted "
    << c.second.shifted.describe() << "\n";
  s << (c.identical() ? "shifted homology identical\n" : "shifted homology differs\n");
  for (const auto& d : c.discrepancies) s << "  " << d << "\n";
  o.summary = s.str();
  o.results = Json{{"identical", c.identical()}};
  o.ok = c.identical();
  return o;
}

inline Outputs run_sflow(const RunManifest& m) {
  const auto& p = m.parameters;
  auto path = load_path(m.inputs.at("path"));
  std::optional<double> eps, lam;
  if (p.contains("epsilon")) eps = param<double>(p, "epsilon", 0.0);
  if (p.contains("lambda")) lam = param<double>(p, "lambda", 0.0);
  Outputs o;
  const bool have_n = p.contains("n0") || p.contains("n1");
  Rational n0 = rational_param(p, "n0", Rational(0)), n1 = rational_param(p, "n1", Rational(0));
  auto r = sf_consistency(path, n0, n1, eps, lam);
  if (!have_n) r.violations.erase(std::remove_if(r.violations.begin(), r.violations.end(),
                                                 [](const std::string& v) { return v.rfind("n1 - n0", 0) == 0; }),
                                  r.violations.end());
  o.homology_csv = sf_consistency_csv(r);
  o.certificate["holds"] = r.holds();
  o.certificate["violations"] = r.violations;
  o.plot = {};
  std::ostringstream s;
  s << "spectral flow " << r.sf << " (epsilon " << r.epsilon << ")\n";
  s << "n_lambda: " << r.n_lambda_start << " -> " << r.n_lambda_end << "\n";
  if (have_n) s << "n1 - n0 = " << format_rational(r.dn) << "\n";
  s << (r.holds() ? "identity holds\n" : "identity violated\n");
  for (const auto& v : r.violations) s << "  " << v << "\n";
  o.summary = s.str();
  o.results = Json{{"spectral_flow", r.sf}, {"holds", r.holds()}};
  o.ok = r.holds();
  return o;
}

inline Outputs run_lattice(const RunManifest& m) {
  const auto& p = m.parameters;
  Rational s;
  if (p.contains("s")) {
    s = rational_param(p, "s", Rational(0));
  } else {
    s = s_upper_bound(rational_param(p, "n", Rational(0)), param<int>(p, "r_min", 0));
  }
  int bound = param<int>(p, "coord_bound", 2);
  Json expect = p.contains("expect") ? p.at("expect") : Json::object();
  Outputs o;
  std::ostringstream csv, sm;
  csv << "form,rank,max_value,s,pass,equality,certified,c_sq,witness\n";
  sm << "bound s = " << format_rational(s) << "\n";
  for (const auto& [name, file] : m.inputs) {
    auto form = load_gram(file);
    require(form.unimodular(), ErrorCode::InvalidArgument, name + ": form is not unimodular");
    EnumerationOptions eo;
    eo.workers = m.worker_count;
    auto r = froyshov_check(form, s, bound, eo);
    csv << name << "," << form.rank() << "," << format_rational(r.max_value) << "," << format_rational(s) << ","
        << (r.pass ? "pass" : "fail") << "," << (r.equality ? "true" : "false") << ","
        << (r.certified ? "true" : "false") << "," << r.c_sq << ",";
    for (std::size_t i = 0; i < r.witness.size(); ++i) csv << (i ? ";" : "") << r.witness[i];
    csv << "\n";
    sm << name << ": " << (r.pass ? "pass" : "fail") << " (max (b2 + c^2)/8 = " << format_rational(r.max_value)
       << (r.certified ? ", certified" : ", search bound only") << ")\n";
    o.results[name] = r.pass ? "pass" : "fail";
    if (expect.contains(name)) {
      bool want = expect[name].get<std::string>() == "pass";
      if (want != r.pass) o.ok = false;
    }
  }
  o.homology_csv = csv.str();
  o.certificate["s"] = format_rational(s);
  o.summary = sm.str();
  return o;
}

inline Outputs run_conley_demo(const RunManifest& m) {
  const auto& p = m.parameters;
  std::string ex = param<std::string>(p, "example", "");
  int n = param<int>(p, "cubes_per_side", 32);
  FlowMapOptions fo;
  fo.T = param<double>(p, "T", 0.0);
  fo.time_scale = param<double>(p, "time_scale", 8.0);
  fo.workers = static_cast<unsigned>(m.worker_count);
  auto compute = [&](const auto& field, double half) {
    const std::size_t d = field.dim();
    Box box{std::vector<double>(d, -half), std::vector<double>(d, half)};
    auto A = build_grid(box, 2 * half / n);
    auto F = flow_map_outer(field, A, fo);
    auto iso = isolating_check(F, A);
    if (!iso.ok) fail(ErrorCode::IsolationFailure, "the invariant part touches the boundary of the box");
    CubicalSet empty(A.frame());
    auto ip = index_pair(F, A, empty, empty);
    return std::pair{relative_homology(ip.N, ip.L, static_cast<int>(d)), ip};
  };
  GradedGroup H;
  IndexPair ip;
  if (ex == "linear") {
    int d = param<int>(p, "dim", 2), k = param<int>(p, "negative", 1);
    if (d < 1 || d > 4 || k < 0 || k > d) fail(ErrorCode::Parse, "parameters: need 1 <= dim <= 4 and 0 <= negative <= dim");
    DiagonalLinearField f;
    for (int i = 0; i < d; ++i) f.nu.push_back(i < k ? -1.0 : 1.0);
    std::tie(H, ip) = compute(f, param<double>(p, "half_width", 1.0));
  } else if (ex == "double-well") {
    std::tie(H, ip) = compute(double_well_field(), param<double>(p, "half_width", 2.0));
  } else if (ex == "saddle") {
    std::tie(H, ip) = compute(saddle_field(), param<double>(p, "half_width", 1.0));
  } else {
    fail(ErrorCode::Parse, "parameters: example must be linear, double-well or saddle");
  }
  Outputs o;
  o.homology_csv = H.csv();
  o.certificate["index_pair"] = certificate_object(ip.certificate);
  o.certificate["N_cubes"] = ip.N.size();
  o.certificate["L_cubes"] = ip.L.size();
  o.certificate["invariant_cubes"] = ip.S.size();
  o.plot = {{ex, H}};
  o.summary = ex + ": " + H.describe() + "\n";
  o.results = Json{{"homology", H.describe()}};
  o.ok = ip.certificate.all();
  return o;
}

}  // namespace detail

inline RunResult run(const RunManifest& m) {
  RunResult rr;
  try {
    const std::string key = manifest_key(m);
    fs::path out = m.output_dir;
    fs::create_directories(out);
    detail::Outputs o;
    auto t0 = std::chrono::steady_clock::now();
    if (m.command == "swf")
      o = detail::run_swf(m, &rr.cache);
    else if (m.command == "decompose")
      o = detail::run_decompose(m, &rr.cache);
    else if (m.command == "cutoff-compare")
      o = detail::run_cutoff_compare(m, &rr.cache);
    else if (m.command == "sflow")
      o = detail::run_sflow(m);
    else if (m.command == "lattice")
      o = detail::run_lattice(m);
    else if (m.command == "conley-demo")
      o = detail::run_conley_demo(m);
    else
      fail(ErrorCode::Parse, "unknown command " + m.command);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    rr.bundle = out / "bundles" / (m.command + "-" + key);
    fs::create_directories(rr.bundle);
    write_text(rr.bundle / "homology.csv", o.homology_csv);
    o.certificate["checks_passed"] = o.ok;
    write_text(rr.bundle / "certificate.json", o.certificate.dump(2) + "\n");
    write_text(rr.bundle / "betti.svg", betti_svg(o.plot, m.command + " " + key));
    for (const auto& [name, text] : o.extra_files) write_text(rr.bundle / name, text);
    Json prov;
    prov["tool"] = "swfc";
    prov["version"] = kVersion;
    prov["key"] = key;
    prov["manifest"] = manifest_to_json(m);
    Json hashes = Json::object();
    for (const auto& [k, v] : m.inputs) hashes[k] = hex64(fnv1a(detail::read_file(v)));
    prov["input_hashes"] = hashes;
    prov["results"] = o.results;
    write_text(rr.bundle / "provenance.json", prov.dump(2) + "\n");
    write_text(rr.bundle / "summary.txt", o.summary);
    rr.summary = o.summary;
    rr.seconds = secs;
    rr.checks_passed = o.ok;
    rr.exit_code = 0;
  } catch (const Error& e) {
    rr.exit_code = exit_code_for(e.code());
    rr.error_code = to_string(e.code());
    rr.message = e.what();
  } catch (const Json::exception& e) {
    rr.exit_code = 2;
    rr.error_code = "Parse";
    rr.message = e.what();
  } catch (const std::exception& e) {
    rr.exit_code = 5;
    rr.error_code = "Internal";
    rr.message = e.what();
  }
  return rr;
}

// Reads the manifest stored in a bundle's provenance record.
inline RunManifest manifest_from_provenance(const std::string& path) {
  Json j;
  try {
    j = Json::parse(detail::read_file(path));
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }
  if (!j.contains("manifest")) fail(ErrorCode::Parse, path + ": no manifest record");
  return manifest_from_json(j["manifest"], fs::path(path).parent_path());
}

inline std::string error_json(const RunResult& r) {
  return Json{{"error", r.error_code}, {"exit_code", r.exit_code}, {"message", r.message}}.dump();
}

}  // namespace swfc
