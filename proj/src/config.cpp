#include "fraclat/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "fraclat/errors.hpp"

namespace fraclat {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  if (t == "inf" || t == "+inf") return kInfinity;
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("not a number: '" + t + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& s) {
  const std::string t = trim(s);
  std::int64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("not an integer: '" + t + "'");
  }
  return v;
}

int parse_small_int(const std::string& s) {
  const auto v = parse_int(s);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("integer out of range: '" + s + "'");
  }
  return static_cast<int>(v);
}

bool parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("not a boolean: '" + t + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <class T, class F>
std::vector<T> parse_list(const std::string& s, F conv) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(conv(item));
  return out;
}

template <class T, class F>
std::string fmt_list(const std::vector<T>& v, F conv) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += conv(v[i]);
  }
  return out;
}

std::string fmt_point(const Point& x, int dim) {
  std::vector<double> v(x.begin(), x.begin() + dim);
  return fmt_list(v, fmt);
}

Point parse_point(const std::string& s) {
  const auto v = parse_list<double>(s, parse_double);
  if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ConfigError("box corner needs 1 or 2 coordinates: '" + s + "'");
  }
  Point p{};
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i];
  return p;
}

int point_dim(const std::string& s) { return static_cast<int>(parse_list<double>(s, parse_double).size()); }

std::string method_name(Method m) { return m == Method::LBFGS ? "lbfgs" : "gd"; }

Method parse_method(const std::string& s) {
  if (s == "lbfgs") return Method::LBFGS;
  if (s == "gd") return Method::GradientDescent;
  throw ConfigError("unknown minimize.method '" + s + "'");
}

WeightDistribution build_simple(const std::string& kind, double value, double sigma, double a, bool normalized) {
  if (kind == "constant") return WeightDistribution::constant(value);
  if (kind == "lognormal") return WeightDistribution::lognormal(sigma, normalized);
  if (kind == "unit_power_law") return WeightDistribution::unit_power_law(a, normalized);
  if (kind == "shifted_pareto") return WeightDistribution::shifted_pareto(a, normalized);
  throw ConfigError("unknown distribution kind '" + kind + "'");
}

struct Field {
  std::string key;
  std::function<std::string(const StudyConfig&)> get;
  std::function<void(StudyConfig&, const std::string&)> set;
  std::function<bool(const StudyConfig&)> present = [](const StudyConfig&) { return true; };
};

#define FRACLAT_DOUBLE(KEY, MEMBER)                                              \
  Field {                                                                        \
    KEY, [](const StudyConfig& c) { return fmt(c.MEMBER); },                     \
        [](StudyConfig& c, const std::string& v) { c.MEMBER = parse_double(v); } \
  }
#define FRACLAT_INT(KEY, MEMBER)                                                    \
  Field {                                                                           \
    KEY, [](const StudyConfig& c) { return std::to_string(c.MEMBER); },             \
        [](StudyConfig& c, const std::string& v) { c.MEMBER = parse_small_int(v); } \
  }
#define FRACLAT_BOOL(KEY, MEMBER)                                              \
  Field {                                                                      \
    KEY, [](const StudyConfig& c) { return fmt_bool(c.MEMBER); },              \
        [](StudyConfig& c, const std::string& v) { c.MEMBER = parse_bool(v); } \
  }
#define FRACLAT_STRING(KEY, MEMBER)                                \
  Field {                                                          \
    KEY, [](const StudyConfig& c) { return c.MEMBER; },            \
        [](StudyConfig& c, const std::string& v) { c.MEMBER = v; } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"study", [](const StudyConfig& c) { return to_string(c.study); },
       [](StudyConfig& c, const std::string& v) { c.study = parse_study(v); }},
      FRACLAT_INT("d", d),
      FRACLAT_DOUBLE("s", s),
      FRACLAT_DOUBLE("p", p),
      {"q_max", [](const StudyConfig& c) { return fmt(*c.q_max); },
       [](StudyConfig& c, const std::string& v) { c.q_max = parse_double(v); },
       [](const StudyConfig& c) { return c.q_max.has_value(); }},
      {"eps_list", [](const StudyConfig& c) { return fmt_list(c.eps_list, fmt); },
       [](StudyConfig& c, const std::string& v) { c.eps_list = parse_list<double>(v, parse_double); }},
      {"domain.lo", [](const StudyConfig& c) { return fmt_point(c.domain.lo, c.domain.dim); },
       [](StudyConfig& c, const std::string& v) {
         c.domain.lo = parse_point(v);
         c.domain.dim = point_dim(v);
       }},
      {"domain.hi", [](const StudyConfig& c) { return fmt_point(c.domain.hi, c.domain.dim); },
       [](StudyConfig& c, const std::string& v) {
         c.domain.hi = parse_point(v);
         if (point_dim(v) != c.domain.dim) throw ConfigError("domain.lo and domain.hi differ in dimension");
       }},
      {"halo.lo", [](const StudyConfig& c) { return fmt_point(c.halo->lo, c.halo->dim); },
       [](StudyConfig& c, const std::string& v) {
         if (!c.halo) c.halo = Box{};
         c.halo->lo = parse_point(v);
         c.halo->dim = point_dim(v);
       },
       [](const StudyConfig& c) { return c.halo.has_value(); }},
      {"halo.hi", [](const StudyConfig& c) { return fmt_point(c.halo->hi, c.halo->dim); },
       [](StudyConfig& c, const std::string& v) {
         if (!c.halo) throw ConfigError("halo.hi given before halo.lo");
         c.halo->hi = parse_point(v);
         if (point_dim(v) != c.halo->dim) throw ConfigError("halo.lo and halo.hi differ in dimension");
       },
       [](const StudyConfig& c) { return c.halo.has_value(); }},
      FRACLAT_STRING("dist.kind", dist.kind),
      FRACLAT_BOOL("dist.normalized", dist.normalized),
      FRACLAT_DOUBLE("dist.value", dist.value),
      FRACLAT_DOUBLE("dist.sigma", dist.sigma),
      FRACLAT_DOUBLE("dist.a", dist.a),
      FRACLAT_DOUBLE("dist.alpha", dist.alpha),
      FRACLAT_STRING("dist.base.kind", dist.base_kind),
      FRACLAT_DOUBLE("dist.base.value", dist.base_value),
      FRACLAT_DOUBLE("dist.base.sigma", dist.base_sigma),
      FRACLAT_DOUBLE("dist.base.a", dist.base_a),
      {"seeds",
       [](const StudyConfig& c) {
         return fmt_list(c.seeds, [](std::uint64_t v) { return std::to_string(v); });
       },
       [](StudyConfig& c, const std::string& v) {
         c.seeds = parse_list<std::uint64_t>(v, [](const std::string& t) {
           const auto x = parse_int(t);
           if (x < 0) throw ConfigError("seeds must be non-negative");
           return static_cast<std::uint64_t>(x);
         });
       }},
      FRACLAT_STRING("f.kind", f_kind),
      FRACLAT_DOUBLE("f.value", f_value),
      FRACLAT_STRING("V.kind", V_kind),
      FRACLAT_DOUBLE("V.delta", V_delta),
      FRACLAT_STRING("G.kind", G_kind),
      FRACLAT_DOUBLE("G.alpha", G_alpha),
      FRACLAT_DOUBLE("G.k", G_k),
      {"constraint", [](const StudyConfig& c) { return to_string(c.constraint); },
       [](StudyConfig& c, const std::string& v) { c.constraint = parse_constraint(v); }},
      {"flavor", [](const StudyConfig& c) { return to_string(c.flavor); },
       [](StudyConfig& c, const std::string& v) { c.flavor = parse_flavor(v); }},
      FRACLAT_DOUBLE("solver.tol", solver_tol),
      FRACLAT_INT("solver.max_iter", solver_max_iter),
      FRACLAT_BOOL("solver.jacobi", solver_jacobi),
      FRACLAT_DOUBLE("minimize.grad_tol", minimize_grad_tol),
      FRACLAT_INT("minimize.max_iter", minimize_max_iter),
      {"minimize.method", [](const StudyConfig& c) { return method_name(c.minimize_method); },
       [](StudyConfig& c, const std::string& v) { c.minimize_method = parse_method(v); }},
      FRACLAT_INT("spectral.k", spectral_k),
      FRACLAT_STRING("gamma.function", gamma_function),
      FRACLAT_DOUBLE("gamma.height", gamma_height),
      FRACLAT_DOUBLE("gamma.radius", gamma_radius),
      FRACLAT_INT("gamma.quad_n", gamma_quad_n),
      FRACLAT_DOUBLE("gamma.xi", gamma_xi),
      {"embeddings.q_list", [](const StudyConfig& c) { return fmt_list(c.embeddings_q_list, fmt); },
       [](StudyConfig& c, const std::string& v) { c.embeddings_q_list = parse_list<double>(v, parse_double); }},
      FRACLAT_BOOL("embeddings.weighted", embeddings_weighted),
      {"embeddings.functions",
       [](const StudyConfig& c) { return fmt_list(c.embeddings_functions, [](const std::string& x) { return x; }); },
       [](StudyConfig& c, const std::string& v) {
         c.embeddings_functions = parse_list<std::string>(v, [](const std::string& x) { return x; });
       }},
      {"ergodic.radii",
       [](const StudyConfig& c) { return fmt_list(c.ergodic_radii, [](int v) { return std::to_string(v); }); },
       [](StudyConfig& c, const std::string& v) { c.ergodic_radii = parse_list<int>(v, parse_small_int); }},
      FRACLAT_INT("ergodic.origins", ergodic_origins),
      FRACLAT_DOUBLE("ergodic.q", ergodic_q),
      FRACLAT_DOUBLE("ergodic.eps", ergodic_eps),
      {"ergodic.xi_list", [](const StudyConfig& c) { return fmt_list(c.ergodic_xi_list, fmt); },
       [](StudyConfig& c, const std::string& v) { c.ergodic_xi_list = parse_list<double>(v, parse_double); }},
      {"ergodic.alpha_list", [](const StudyConfig& c) { return fmt_list(c.ergodic_alpha_list, fmt); },
       [](StudyConfig& c, const std::string& v) { c.ergodic_alpha_list = parse_list<double>(v, parse_double); }},
      {"divergence.radii",
       [](const StudyConfig& c) { return fmt_list(c.divergence_radii, [](int v) { return std::to_string(v); }); },
       [](StudyConfig& c, const std::string& v) { c.divergence_radii = parse_list<int>(v, parse_small_int); }},
      FRACLAT_INT("divergence.origins", divergence_origins),
      FRACLAT_STRING("out", out),
      FRACLAT_STRING("format", format),
  };
  return table;
}

#undef FRACLAT_DOUBLE
#undef FRACLAT_INT
#undef FRACLAT_BOOL
#undef FRACLAT_STRING

bool is_dyadic(double ratio) {
  const double l = std::log2(ratio);
  return std::abs(l - std::round(l)) < 1e-12 && std::round(l) >= 1.0;
}

}  // namespace

std::string to_string(StudyKind k) {
  switch (k) {
    case StudyKind::Solve: return "solve";
    case StudyKind::Homogenize: return "homogenize";
    case StudyKind::GammaLimit: return "gamma_limit";
    case StudyKind::Spectral: return "spectral";
    case StudyKind::Embeddings: return "embeddings";
    case StudyKind::Ergodic: return "ergodic";
    case StudyKind::Vanish: return "vanish";
  }
  return "unknown";
}

StudyKind parse_study(const std::string& s) {
  static const std::map<std::string, StudyKind> names = {
      {"solve", StudyKind::Solve},           {"homogenize", StudyKind::Homogenize},
      {"gamma_limit", StudyKind::GammaLimit}, {"gamma-limit", StudyKind::GammaLimit},
      {"spectral", StudyKind::Spectral},     {"embeddings", StudyKind::Embeddings},
      {"ergodic", StudyKind::Ergodic},       {"vanish", StudyKind::Vanish}};
  const auto it = names.find(s);
  if (it == names.end()) throw ConfigError("unknown study '" + s + "'");
  return it->second;
}

WeightDistribution DistConfig::build() const {
  try {
    if (kind == "decaying_product") {
      if (base_kind == "decaying_product") throw ConfigError("decaying_product cannot be its own base");
      return WeightDistribution::decaying_product(build_simple(base_kind, base_value, base_sigma, base_a, true),
                                                  alpha);
    }
    return build_simple(kind, value, sigma, a, normalized);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid distribution parameters: ") + e.what());
  }
}

Potential StudyConfig::potential() const {
  try {
    if (V_kind == "power") return Potential::power(p);
    if (V_kind == "smoothed") return Potential::smoothed_power(p, V_delta);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid potential: ") + e.what());
  }
  throw ConfigError("unknown V.kind '" + V_kind + "'");
}

ZeroOrderTerm StudyConfig::zero_order() const {
  try {
    if (G_kind == "none") return ZeroOrderTerm{};
    if (G_kind == "power") return ZeroOrderTerm::power(G_alpha, G_k);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid zero-order term: ") + e.what());
  }
  throw ConfigError("unknown G.kind '" + G_kind + "'");
}

std::optional<GridFunction> StudyConfig::forcing(const LatticeDomain& lattice) const {
  const double v = f_value;
  const int dim = d;
  if (f_kind == "zero") return std::nullopt;
  if (f_kind == "constant") return GridFunction::constant(lattice, v);
  if (f_kind == "tent") {
    return GridFunction::from_function(lattice, [v, dim](const Point& x) {
      double m = 0.0;
      for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(x[i]));
      return v * std::max(0.0, 1.0 - m);
    });
  }
  if (f_kind == "sin") {
    return GridFunction::from_function(lattice, [v, dim](const Point& x) {
      double r = v;
      for (int i = 0; i < dim; ++i) r *= std::sin(std::numbers::pi * x[i]);
      return r;
    });
  }
  throw ConfigError("unknown f.kind '" + f_kind + "'");
}

StudyConfig parse_config(const std::string& text, std::optional<StudyKind> study) {
  StudyConfig cfg;
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.key] = &f;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  // Lower corners must be read before upper ones, whatever the file order.
  std::vector<std::pair<int, std::pair<std::string, std::string>>> deferred;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!index.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen.count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(seen[key]) + ")");
    }
    seen[key] = lineno;
    if (key == "domain.hi" || key == "halo.hi") {
      deferred.push_back({lineno, {key, value}});
      continue;
    }
    try {
      index[key]->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + key + ": " + e.what());
    }
  }
  for (const auto& [ln, kv] : deferred) {
    try {
      index[kv.first]->set(cfg, kv.second);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(ln) + ": " + kv.first + ": " + e.what());
    }
  }
  if (study) {
    if (seen.count("study") && cfg.study != *study) {
      throw ConfigError("config declares study '" + to_string(cfg.study) + "' but '" + to_string(*study) +
                        "' was requested");
    }
    cfg.study = *study;
  }
  if (seen.count("domain.lo") != seen.count("domain.hi")) throw ConfigError("domain.lo and domain.hi go together");
  if (seen.count("halo.lo") != seen.count("halo.hi")) throw ConfigError("halo.lo and halo.hi go together");
  validate(cfg);
  return cfg;
}

StudyConfig load_config(const std::string& path, std::optional<StudyKind> study) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), study);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize(const StudyConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    if (!f.present(cfg)) continue;
    out += f.key + "=" + f.get(cfg) + "\n";
  }
  return out;
}

void validate(const StudyConfig& cfg) {
  if (cfg.d < 1 || cfg.d > kMaxDim) throw ConfigError("d must be 1 or 2");
  if (cfg.domain.dim != cfg.d) throw ConfigError("domain dimension differs from d");
  if (cfg.halo && cfg.halo->dim != cfg.d) throw ConfigError("halo dimension differs from d");
  for (int i = 0; i < cfg.d; ++i) {
    if (!(cfg.domain.lo[i] < cfg.domain.hi[i])) throw ConfigError("domain box is empty");
    if (cfg.halo && !(cfg.halo->lo[i] <= cfg.domain.lo[i] && cfg.halo->hi[i] >= cfg.domain.hi[i])) {
      throw ConfigError("halo must contain the domain");
    }
  }
  if (!(cfg.s > 0.0 && cfg.s < 1.0)) throw ConfigError("s must lie in (0, 1)");
  if (!(cfg.p > 1.0)) throw ConfigError("p must exceed 1");
  if (cfg.eps_list.empty()) throw ConfigError("eps_list is empty");
  for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
    if (!(cfg.eps_list[i] > 0.0)) throw ConfigError("eps_list entries must be positive");
    if (i > 0 && !(cfg.eps_list[i] < cfg.eps_list[i - 1])) throw ConfigError("eps_list must be strictly decreasing");
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds is empty");
  if (cfg.format != "csv" && cfg.format != "jsonl") throw ConfigError("format must be csv or jsonl");
  if (cfg.spectral_k < 1) throw ConfigError("spectral.k must be positive");
  if (cfg.gamma_quad_n < 2 || cfg.gamma_quad_n % 2 != 0) throw ConfigError("gamma.quad_n must be even and >= 2");
  if (!(cfg.gamma_xi > 0.0)) throw ConfigError("gamma.xi must be positive");
  if (cfg.ergodic_origins < 1 || cfg.divergence_origins < 1) throw ConfigError("origin counts must be positive");

  const WeightDistribution dist = cfg.dist.build();
  (void)cfg.potential();
  (void)cfg.zero_order();

  if (cfg.study == StudyKind::Homogenize) {
    for (std::size_t i = 1; i < cfg.eps_list.size(); ++i) {
      if (!is_dyadic(cfg.eps_list[i - 1] / cfg.eps_list[i])) {
        throw ConfigError("homogenize needs dyadic ratios between consecutive eps values");
      }
    }
  }
  const bool weighted = !std::holds_alternative<dist::Constant>(dist.kind());
  const bool needs_assumption = cfg.study == StudyKind::Homogenize || cfg.study == StudyKind::Spectral ||
                                (cfg.study == StudyKind::Embeddings && cfg.embeddings_weighted);
  if (needs_assumption && weighted) {
    const auto rep = check_assumption(cfg.p, cfg.s, cfg.d, cfg.lower_moment());
    if (!rep.satisfied) {
      throw ConfigError("lower-moment assumption fails for q_max = " + fmt(cfg.lower_moment()) +
                        " with p = " + fmt(cfg.p) + ", s = " + fmt(cfg.s));
    }
  }
  if (cfg.study == StudyKind::Spectral && cfg.p != 2.0) throw ConfigError("spectral study needs p = 2");
}

}  // namespace fraclat
