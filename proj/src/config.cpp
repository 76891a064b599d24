#include "levi/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <utility>

#include "levi/expr.hpp"

namespace levi {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  size_t b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& value, int line) {
  errno = 0;
  char* end = nullptr;
  double d = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw ConfigError("value of '" + key + "' is not a number: '" + value + "'", line);
  if (!std::isfinite(d))
    throw ConfigError("value of '" + key + "' is not finite: '" + value + "'", line);
  return d;
}

int parse_integer(const std::string& key, const std::string& value, int line) {
  double d = parse_number(key, value, line);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    throw ConfigError("value of '" + key + "' is not an integer: '" + value + "'", line);
  return static_cast<int>(d);
}

struct RawEntry {
  std::string key, value;
  int line = 0;
};

Expr parse_expr(const std::string& key, const std::string& src, int n, int line) {
  try {
    return Expr::parse(src, n);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("in '") + key + "': " + e.what(), line);
  }
}

}  // namespace

Region RunConfig::sampling_region() const {
  Region r;
  r.x_lo.assign(static_cast<size_t>(n), x_lo);
  r.x_hi.assign(static_cast<size_t>(n), x_hi);
  r.t_lo = tau;
  r.t_hi = tau + dt_max;
  return r;
}

RunConfig load_config(std::istream& is) {
  std::vector<RawEntry> entries;
  {
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
      ++line_no;
      if (size_t hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      std::string stripped = trim(raw);
      if (stripped.empty()) continue;
      size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected 'key = value', got '" + stripped + "'", line_no);
      RawEntry e;
      e.key = trim(stripped.substr(0, eq));
      e.value = trim(stripped.substr(eq + 1));
      e.line = line_no;
      if (e.key.empty()) throw ConfigError("empty key", line_no);
      if (e.value.empty()) throw ConfigError("empty value for '" + e.key + "'", line_no);
      entries.push_back(std::move(e));
    }
  }

  RunConfig cfg;
  // Config-level lattice defaults lean on the auto rules (halfwidth from the
  // query radius, grading from the declared smoothness).
  cfg.levi.grid.halfwidth = 0.0;

  // The dimension gates how every coefficient entry is parsed, so resolve it
  // first regardless of where it appears in the file.
  for (const RawEntry& e : entries) {
    if (e.key != "n") continue;
    cfg.n = parse_integer(e.key, e.value, e.line);
    if (cfg.n < 1 || cfg.n > 8)
      throw ConfigError("n must be in 1..8, got " + std::to_string(cfg.n), e.line);
  }
  const int n = cfg.n;

  std::vector<std::string> a_src(static_cast<size_t>(n) * n);
  std::vector<int> a_line(static_cast<size_t>(n) * n, 0);
  std::vector<std::string> b_src(static_cast<size_t>(n));
  std::vector<int> b_line(static_cast<size_t>(n), 0);
  bool any_b = false, any_q = false;
  std::string q_src;
  int q_line = 0;
  bool rho_hint_set = false;
  std::map<std::string, int> where;  // last line a scalar key was set on

  static const std::regex a_re(R"(^a\[(\d+)\]\[(\d+)\]$)");
  static const std::regex b_re(R"(^b\[(\d+)\]$)");

  for (const RawEntry& e : entries) {
    const std::string& k = e.key;
    const std::string& v = e.value;
    where[k] = e.line;
    std::smatch m;
    if (k == "n") {
      continue;  // handled above
    } else if (k == "alpha") {
      cfg.alpha = parse_number(k, v, e.line);
    } else if (k == "kappa") {
      cfg.kappa = parse_number(k, v, e.line);
    } else if (k == "M") {
      cfg.M = parse_number(k, v, e.line);
    } else if (k == "N1") {
      if (v == "auto") {
        cfg.N1_auto = true;
        cfg.N1 = 0.0;
      } else {
        cfg.N1_auto = false;
        cfg.N1 = parse_number(k, v, e.line);
      }
    } else if (k == "N2") {
      cfg.N2 = parse_number(k, v, e.line);
    } else if (std::regex_match(k, m, a_re)) {
      int i = std::stoi(m[1].str()), j = std::stoi(m[2].str());
      if (i < 1 || i > n || j < 1 || j > n)
        throw ConfigError("index out of range for n=" + std::to_string(n) + " in '" + k + "'",
                          e.line);
      // Entries are symmetric by definition; one triangle suffices.
      a_src[static_cast<size_t>(i - 1) * n + (j - 1)] = v;
      a_line[static_cast<size_t>(i - 1) * n + (j - 1)] = e.line;
      a_src[static_cast<size_t>(j - 1) * n + (i - 1)] = v;
      a_line[static_cast<size_t>(j - 1) * n + (i - 1)] = e.line;
    } else if (std::regex_match(k, m, b_re)) {
      int i = std::stoi(m[1].str());
      if (i < 1 || i > n)
        throw ConfigError("index out of range for n=" + std::to_string(n) + " in '" + k + "'",
                          e.line);
      b_src[static_cast<size_t>(i - 1)] = v;
      b_line[static_cast<size_t>(i - 1)] = e.line;
      any_b = true;
    } else if (k == "q") {
      q_src = v;
      q_line = e.line;
      any_q = true;
    } else if (k == "quad.spatial_nodes") {
      cfg.quad.spatial_nodes = parse_integer(k, v, e.line);
    } else if (k == "quad.time_nodes") {
      cfg.quad.time_nodes = parse_integer(k, v, e.line);
    } else if (k == "quad.radius_factor") {
      cfg.quad.spatial_radius_factor = parse_number(k, v, e.line);
    } else if (k == "quad.time_grading") {
      cfg.quad.time_grading_exponent = parse_number(k, v, e.line);
    } else if (k == "grid.time_slices") {
      cfg.levi.grid.time_slices = parse_integer(k, v, e.line);
    } else if (k == "grid.spacing") {
      cfg.levi.grid.spacing = parse_number(k, v, e.line);
    } else if (k == "grid.halfwidth") {
      cfg.levi.grid.halfwidth = parse_number(k, v, e.line);
    } else if (k == "grid.grading") {
      cfg.levi.grid.grading = parse_number(k, v, e.line);
    } else if (k == "levi.ell_max") {
      cfg.levi.ell_max = parse_integer(k, v, e.line);
    } else if (k == "levi.series_tol") {
      cfg.levi.series_tol = parse_number(k, v, e.line);
    } else if (k == "levi.chain_tol") {
      cfg.levi.chain_tol = parse_number(k, v, e.line);
    } else if (k == "levi.horizon") {
      cfg.levi.horizon = parse_number(k, v, e.line);
    } else if (k == "levi.degenerate_gap") {
      cfg.levi.degenerate_gap = parse_number(k, v, e.line);
    } else if (k == "levi.rho_hint") {
      cfg.levi.rho_hint = parse_number(k, v, e.line);
      rho_hint_set = true;
    } else if (k == "region.x_lo") {
      cfg.x_lo = parse_number(k, v, e.line);
    } else if (k == "region.x_hi") {
      cfg.x_hi = parse_number(k, v, e.line);
    } else if (k == "region.tau") {
      cfg.tau = parse_number(k, v, e.line);
    } else if (k == "region.dt_max") {
      cfg.dt_max = parse_number(k, v, e.line);
    } else if (k == "region.rho_max") {
      cfg.rho_max = parse_number(k, v, e.line);
    } else {
      throw ConfigError("unknown key '" + k + "'", e.line);
    }
  }

  auto line_of = [&where](const std::string& k) {
    auto it = where.find(k);
    return it == where.end() ? 0 : it->second;
  };

  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
    throw ConfigError("alpha must be in (0, 1]", line_of("alpha"));
  if (!(cfg.kappa > 0.0)) throw ConfigError("kappa must be positive", line_of("kappa"));
  if (!(cfg.kappa <= cfg.M))
    throw ConfigError("ellipticity bounds must satisfy kappa <= M",
                      std::max(line_of("kappa"), line_of("M")));
  if (!cfg.N1_auto && cfg.N1 < 0.0) throw ConfigError("N1 must be >= 0", line_of("N1"));
  if (cfg.N2 < 0.0) throw ConfigError("N2 must be >= 0", line_of("N2"));

  if (cfg.quad.spatial_nodes < 2)
    throw ConfigError("quad.spatial_nodes must be >= 2", line_of("quad.spatial_nodes"));
  if (cfg.quad.time_nodes < 2)
    throw ConfigError("quad.time_nodes must be >= 2", line_of("quad.time_nodes"));
  if (!(cfg.quad.spatial_radius_factor > 0.0))
    throw ConfigError("quad.radius_factor must be positive", line_of("quad.radius_factor"));
  if (cfg.quad.time_grading_exponent < 0.0)
    throw ConfigError("quad.time_grading must be >= 0 (0 = auto)", line_of("quad.time_grading"));
  if (cfg.levi.grid.time_slices < 2)
    throw ConfigError("grid.time_slices must be >= 2", line_of("grid.time_slices"));
  if (!(cfg.levi.grid.spacing > 0.0))
    throw ConfigError("grid.spacing must be positive", line_of("grid.spacing"));
  if (cfg.levi.grid.halfwidth < 0.0)
    throw ConfigError("grid.halfwidth must be >= 0 (0 = auto)", line_of("grid.halfwidth"));
  if (cfg.levi.grid.grading < 1.0)
    throw ConfigError("grid.grading must be >= 1", line_of("grid.grading"));
  if (cfg.levi.ell_max < 1) throw ConfigError("levi.ell_max must be >= 1", line_of("levi.ell_max"));
  if (!(cfg.levi.series_tol > 0.0))
    throw ConfigError("levi.series_tol must be positive", line_of("levi.series_tol"));
  if (!(cfg.levi.chain_tol > 0.0))
    throw ConfigError("levi.chain_tol must be positive", line_of("levi.chain_tol"));
  if (cfg.levi.horizon < 0.0)
    throw ConfigError("levi.horizon must be >= 0 (0 = auto)", line_of("levi.horizon"));
  if (cfg.levi.degenerate_gap < 0.0)
    throw ConfigError("levi.degenerate_gap must be >= 0", line_of("levi.degenerate_gap"));
  if (rho_hint_set && !(cfg.levi.rho_hint > 0.0))
    throw ConfigError("levi.rho_hint must be positive", line_of("levi.rho_hint"));
  if (!(cfg.x_lo < cfg.x_hi))
    throw ConfigError("region.x_lo must be < region.x_hi",
                      std::max(line_of("region.x_lo"), line_of("region.x_hi")));
  if (!(cfg.dt_max > 0.0))
    throw ConfigError("region.dt_max must be positive", line_of("region.dt_max"));
  if (!(cfg.rho_max > 0.0))
    throw ConfigError("region.rho_max must be positive", line_of("region.rho_max"));

  // Keep the correction lattice wide enough for the configured query radius.
  if (!rho_hint_set) cfg.levi.rho_hint = std::max(cfg.levi.rho_hint, cfg.rho_max);

  for (int i = 0; i < n; ++i)
    if (a_src[static_cast<size_t>(i) * n + i].empty())
      throw ConfigError("missing required entry a[" + std::to_string(i + 1) + "][" +
                            std::to_string(i + 1) + "]",
                        0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a_src[static_cast<size_t>(i) * n + j].empty())
        a_src[static_cast<size_t>(i) * n + j] = "0";

  auto a_parsed = std::make_shared<std::vector<Expr>>();
  a_parsed->reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      size_t idx = static_cast<size_t>(i) * n + j;
      a_parsed->push_back(parse_expr(
          "a[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]", a_src[idx], n,
          a_line[idx]));
    }
  auto b_parsed = std::make_shared<std::vector<Expr>>();
  if (any_b) {
    for (int i = 0; i < n; ++i) {
      const std::string& src = b_src[static_cast<size_t>(i)].empty()
                                   ? std::string("0")
                                   : b_src[static_cast<size_t>(i)];
      b_parsed->push_back(
          parse_expr("b[" + std::to_string(i + 1) + "]", src, n, b_line[static_cast<size_t>(i)]));
    }
  }
  std::optional<Expr> q_parsed;
  if (any_q) q_parsed = parse_expr("q", q_src, n, q_line);

  cfg.a_exprs = std::move(a_src);
  cfg.b_exprs.clear();
  if (any_b)
    for (int i = 0; i < n; ++i) {
      const std::string& src = b_src[static_cast<size_t>(i)];
      cfg.b_exprs.push_back(src.empty() ? std::string("0") : src);
    }
  cfg.q_expr = any_q ? q_src : std::string();

  CoefficientField::MatrixFn a_fn = [a_parsed, n](std::span<const double> x, double t,
                                                  SpdMatrix& out) {
    if (out.dim() != n) out = SpdMatrix(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.at(i, j) = (*a_parsed)[static_cast<size_t>(i) * n + j].eval(x, t);
  };
  CoefficientField::VectorFn b_fn;
  if (any_b) {
    b_fn = [b_parsed](std::span<const double> x, double t, std::span<double> out) {
      for (size_t i = 0; i < out.size(); ++i) out[i] = (*b_parsed)[i].eval(x, t);
    };
  } else {
    b_fn = [](std::span<const double>, double, std::span<double> out) {
      for (double& v : out) v = 0.0;
    };
  }
  CoefficientField::ScalarFn q_fn;
  if (q_parsed) {
    auto qe = std::make_shared<Expr>(*q_parsed);
    q_fn = [qe](std::span<const double> x, double t) { return qe->eval(x, t); };
  } else {
    q_fn = [](std::span<const double>, double) { return 0.0; };
  }

  cfg.field = std::make_shared<CoefficientField>(n, cfg.alpha, cfg.kappa, cfg.M, cfg.N1, cfg.N2,
                                                 std::move(a_fn), std::move(b_fn), std::move(q_fn),
                                                 /*b_is_zero=*/!any_b, /*q_is_zero=*/!any_q);

  // Probe the coefficients once at the region center so expression-domain
  // failures (divide by zero, sqrt of a negative) surface as config errors
  // instead of detonating mid-run.
  {
    std::vector<double> center(static_cast<size_t>(n), 0.5 * (cfg.x_lo + cfg.x_hi));
    double t_mid = cfg.tau + 0.5 * cfg.dt_max;
    try {
      SpdMatrix probe(n);
      cfg.field->a(center, t_mid, probe);
      std::vector<double> bv(static_cast<size_t>(n));
      cfg.field->b(center, t_mid, bv);
      (void)cfg.field->q(center, t_mid);
    } catch (const EvalError& e) {
      throw ConfigError(std::string("coefficient evaluation failed at the region center: ") +
                            e.what(),
                        0);
    }
  }

  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  return load_config(f);
}

RunConfig load_config_text(const std::string& text) {
  std::istringstream is(text);
  return load_config(is);
}

double resolve_auto_n1(RunConfig& cfg, int samples, unsigned long long seed) {
  if (!cfg.field) throw std::logic_error("resolve_auto_n1: config has no field");
  if (!cfg.N1_auto) return cfg.N1;
  HolderEstimate est = estimate_holder_seminorm(*cfg.field, samples, cfg.sampling_region(), seed);
  cfg.N1 = 1.1 * est.value;  // sampled sup inflated to a declared bound

  // Rebuild the field around the resolved constant; the coefficient callables
  // themselves are unchanged.
  auto old = cfg.field;
  CoefficientField::MatrixFn a_fn = [old](std::span<const double> x, double t, SpdMatrix& out) {
    old->a(x, t, out);
  };
  CoefficientField::VectorFn b_fn = [old](std::span<const double> x, double t,
                                          std::span<double> out) { old->b(x, t, out); };
  CoefficientField::ScalarFn q_fn = [old](std::span<const double> x, double t) {
    return old->q(x, t);
  };
  cfg.field = std::make_shared<CoefficientField>(old->n(), old->alpha(), old->kappa(), old->M(),
                                                 cfg.N1, old->N2(), std::move(a_fn),
                                                 std::move(b_fn), std::move(q_fn),
                                                 old->b_is_zero(), old->q_is_zero());
  return cfg.N1;
}

}  // namespace levi
