#include "svilab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "svilab/error.hpp"
#include "svilab/measures.hpp"

namespace svilab {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
}

void check_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
  require_object(j, where);
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) fail(where.empty() ? k : where + "." + k, "unknown key");
}

std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double get_number(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_number()) fail(join(where, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(join(where, key), "must be finite");
  return d;
}

double number_or(const Json& j, const std::string& key, double dflt, const std::string& where) {
  return j.contains(key) ? get_number(j, key, where) : dflt;
}

std::uint64_t count_or(const Json& j, const std::string& key, std::uint64_t dflt,
                       const std::string& where) {
  if (!j.contains(key)) return dflt;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    fail(join(where, key), "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::string string_or(const Json& j, const std::string& key, const std::string& dflt,
                      const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_string()) fail(join(where, key), "expected a string");
  return j.at(key).get<std::string>();
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
}

Scheme scheme_from_string(const std::string& s) {
  const std::string u = upper(s);
  if (u == "IMPLICIT_MONOTONE") return Scheme::ImplicitMonotone;
  if (u == "SEMI_IMPLICIT") return Scheme::SemiImplicit;
  throw ConfigError("scheme: unknown value '" + s + "'");
}

Multiplier multiplier_from_string(const std::string& s) {
  const std::string u = upper(s);
  if (u == "ADDITIVE") return Multiplier::Additive;
  if (u == "LIPSCHITZ_DIAGONAL") return Multiplier::LipschitzDiagonal;
  throw ConfigError("noise.multiplier: unknown value '" + s + "'");
}

DriftKind drift_kind_from_string(const std::string& s) {
  const std::string u = upper(s);
  if (u == "ZERO") return DriftKind::Zero;
  if (u == "CONSTANT_G") return DriftKind::ConstantG;
  if (u == "REGULARIZED_SOLUTION") return DriftKind::RegularizedSolution;
  throw ConfigError("tests.kind: unknown value '" + s + "'");
}

namespace {

const std::set<std::string> kSolverKeys = {"grid",  "potential", "eps",   "dt",
                                           "t_end", "scheme",    "newton", "noise",
                                           "paths", "snapshot_every", "threads", "K"};

Grid parse_grid(const Json& j) {
  check_keys(j, "grid", {"a", "b", "cells"});
  const double a = number_or(j, "a", 0.0, "grid");
  const double b = number_or(j, "b", 1.0, "grid");
  const std::uint64_t cells = count_or(j, "cells", 64, "grid");
  try {
    return Grid(a, b, static_cast<std::size_t>(cells));
  } catch (const Error& e) {
    fail("grid", e.what());
  }
}

NoiseConfig parse_noise(const Json& j) {
  check_keys(j, "noise", {"modes", "weights", "multiplier", "gain", "sigma_cap", "seed"});
  NoiseConfig n;
  n.modes = count_or(j, "modes", n.modes, "noise");
  if (n.modes < 1) fail("noise.modes", "must be at least 1");
  if (j.contains("weights")) {
    const Json& w = j.at("weights");
    if (w.is_string()) {
      if (w.get<std::string>() != "inverse") fail("noise.weights", "only \"inverse\" or a list");
    } else if (w.is_array()) {
      for (const Json& v : w) {
        if (!v.is_number() || !(v.get<double>() >= 0.0)) fail("noise.weights", "entries must be >= 0");
        n.weights.push_back(v.get<double>());
      }
      if (n.weights.size() != n.modes) fail("noise.weights", "need one weight per mode");
    } else {
      fail("noise.weights", "expected \"inverse\" or a list");
    }
  }
  n.multiplier = multiplier_from_string(string_or(j, "multiplier", "ADDITIVE", "noise"));
  n.gain = number_or(j, "gain", n.gain, "noise");
  if (n.gain < 0.0) fail("noise.gain", "must be >= 0");
  n.sigma_cap = number_or(j, "sigma_cap", n.sigma_cap, "noise");
  if (!(n.sigma_cap > 0.0)) fail("noise.sigma_cap", "must be positive");
  n.seed = count_or(j, "seed", 0, "noise");
  return n;
}

}  // namespace

SolverConfig parse_solver_config(const Json& j, bool validate) {
  require_object(j, "config");
  SolverConfig c;
  if (j.contains("grid")) c.grid = parse_grid(j.at("grid"));
  if (j.contains("potential")) {
    const Json& p = j.at("potential");
    try {
      c.potential = p.is_string() ? potential_by_name(p.get<std::string>())
                                  : potential_from_json(p.dump());
    } catch (const Error& e) {
      fail("potential", e.what());
    }
  }
  c.eps = number_or(j, "eps", c.eps, "");
  c.dt = number_or(j, "dt", c.dt, "");
  c.t_end = number_or(j, "t_end", c.t_end, "");
  c.scheme = scheme_from_string(string_or(j, "scheme", "IMPLICIT_MONOTONE", ""));
  if (j.contains("newton")) {
    const Json& nw = j.at("newton");
    check_keys(nw, "newton", {"tol", "max_iter"});
    c.newton_tol = number_or(nw, "tol", c.newton_tol, "newton");
    c.newton_max_iter = static_cast<int>(count_or(nw, "max_iter", c.newton_max_iter, "newton"));
  }
  if (j.contains("noise")) c.noise = parse_noise(j.at("noise"));
  c.paths = count_or(j, "paths", c.paths, "");
  c.snapshot_every = count_or(j, "snapshot_every", 0, "");
  c.threads = static_cast<unsigned>(count_or(j, "threads", c.threads, ""));
  c.K = number_or(j, "K", c.K, "");
  if (c.K < 0.0) fail("K", "must be >= 0");
  if (!(c.eps > 0.0)) fail("eps", "must be positive");
  if (!(c.dt > 0.0)) fail("dt", "must be positive");
  if (!(c.t_end > 0.0)) fail("t_end", "must be positive");
  if (!(c.newton_tol > 0.0)) fail("newton.tol", "must be positive");
  if (c.newton_max_iter < 1) fail("newton.max_iter", "must be at least 1");
  if (c.paths < 1) fail("paths", "must be at least 1");
  try {
    NoiseModel probe(c.grid, c.noise);
  } catch (const ModeOutOfRange& e) {
    fail("noise.modes", e.what());
  }
  if (validate) c.validate();
  return c;
}

Field parse_field(const Grid& grid, const Json& j, const std::string& where) {
  require_object(j, where);
  const std::string kind = string_or(j, "kind", "", where);
  if (kind == "zero") {
    check_keys(j, where, {"kind"});
    return Field(grid);
  }
  if (kind == "sine") {
    check_keys(j, where, {"kind", "amplitude", "mode"});
    const double A = number_or(j, "amplitude", 1.0, where);
    const double k = static_cast<double>(count_or(j, "mode", 1, where));
    if (k < 1) fail(join(where, "mode"), "must be at least 1");
    const double a = grid.a(), len = grid.length();
    return Field::sample(grid, [&](double x) { return A * std::sin(k * std::numbers::pi * (x - a) / len); });
  }
  if (kind == "values") {
    check_keys(j, where, {"kind", "values"});
    const Json& v = j.at("values");
    if (!v.is_array() || v.size() != grid.size())
      fail(join(where, "values"), "need one value per interior node (" + std::to_string(grid.size()) + ")");
    Field f(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!v[i].is_number()) fail(join(where, "values"), "entries must be numbers");
      f.values[i] = v[i].get<double>();
    }
    return f;
  }
  if (kind == "laplacian") {
    check_keys(j, where, {"kind", "of"});
    if (!j.contains("of")) fail(join(where, "of"), "missing");
    const Field g = parse_field(grid, j.at("of"), join(where, "of"));
    return DirichletLaplacian(grid).apply(g);
  }
  if (kind == "measure") {
    check_keys(j, where, {"kind", "atoms", "density", "n"});
    std::vector<Atom> atoms;
    if (j.contains("atoms")) {
      const Json& a = j.at("atoms");
      if (!a.is_array()) fail(join(where, "atoms"), "expected a list of [x, mass]");
      for (const Json& e : a) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
          fail(join(where, "atoms"), "expected a list of [x, mass]");
        atoms.push_back({e[0].get<double>(), e[1].get<double>()});
      }
    }
    const double c = number_or(j, "density", 0.0, where);
    const std::uint64_t n = count_or(j, "n", 64, where);
    if (n < 1) fail(join(where, "n"), "must be at least 1");
    try {
      const RadonMeasure mu = RadonMeasure::from_density(grid, [c](double) { return c; }, atoms);
      return approx_sequence(mu, static_cast<std::size_t>(n));
    } catch (const Error& e) {
      fail(where, e.what());
    }
  }
  fail(join(where, "kind"), "expected zero, sine, values, laplacian or measure");
}

RunConfig parse_run_config(const Json& j, const std::string& default_output,
                           const std::vector<std::string>& extra_keys) {
  std::set<std::string> keys = kSolverKeys;
  keys.insert({"initial", "output"});
  keys.insert(extra_keys.begin(), extra_keys.end());
  check_keys(j, "", keys);
  RunConfig r;
  r.raw = j;
  r.solver = parse_solver_config(j, false);
  r.initial = j.contains("initial") ? parse_field(r.solver.grid, j.at("initial"))
                                    : Field(r.solver.grid);
  r.output = string_or(j, "output", default_output, "");
  if (r.output.empty() || r.output.find("..") != std::string::npos)
    fail("output", "must be a plain relative name");
  if (j.contains("threshold")) {
    r.threshold = get_number(j, "threshold", "");
    if (!(r.threshold > 0.0)) fail("threshold", "must be positive");
  }
  return r;
}

SviRunConfig parse_svi_config(const Json& j) {
  check_keys(j, "", {"candidate", "tests", "C", "stderr_factor", "quadrature", "output"});
  SviRunConfig s;
  s.raw = j;
  if (!j.contains("candidate")) fail("candidate", "missing");
  s.candidate = parse_run_config(j.at("candidate"), "candidate");
  if (!j.contains("tests") || !j.at("tests").is_array() || j.at("tests").empty())
    fail("tests", "need a nonempty list");
  const Grid& g = s.candidate.solver.grid;
  for (std::size_t i = 0; i < j.at("tests").size(); ++i) {
    const Json& t = j.at("tests")[i];
    const std::string where = "tests[" + std::to_string(i) + "]";
    check_keys(t, where, {"kind", "z0", "G", "eps", "label"});
    TestSpec ts;
    const std::string kind = upper(string_or(t, "kind", "", where));
    ts.label = string_or(t, "label", kind, where);
    if (kind == "SELF") {
      ts.self = true;
      if (t.contains("z0") || t.contains("G") || t.contains("eps"))
        fail(where, "SELF takes no z0, G or eps");
    } else {
      ts.kind = drift_kind_from_string(kind);
      if (!t.contains("z0")) fail(join(where, "z0"), "missing");
      ts.z0 = parse_field(g, t.at("z0"), join(where, "z0"));
      if (ts.kind == DriftKind::ConstantG) {
        if (!t.contains("G")) fail(join(where, "G"), "CONSTANT_G needs G");
        ts.G = parse_field(g, t.at("G"), join(where, "G"));
      } else if (t.contains("G")) {
        fail(join(where, "G"), "only CONSTANT_G takes G");
      }
      if (ts.kind == DriftKind::RegularizedSolution) {
        if (!t.contains("eps")) fail(join(where, "eps"), "REGULARIZED_SOLUTION needs eps");
        ts.inner_eps = get_number(t, "eps", where);
        if (!(*ts.inner_eps > 0.0)) fail(join(where, "eps"), "must be positive");
      } else if (t.contains("eps")) {
        fail(join(where, "eps"), "only REGULARIZED_SOLUTION takes eps");
      }
    }
    s.tests.push_back(std::move(ts));
  }
  if (!j.contains("C")) fail("C", "missing");
  s.C = get_number(j, "C", "");
  if (s.C < 0.0) fail("C", "must be >= 0");
  s.stderr_factor = number_or(j, "stderr_factor", 2.0, "");
  if (s.stderr_factor < 0.0) fail("stderr_factor", "must be >= 0");
  const std::string q = upper(string_or(j, "quadrature", "LEFT", ""));
  if (q == "LEFT")
    s.quadrature = Quadrature::Left;
  else if (q == "IMPLICIT")
    s.quadrature = Quadrature::Implicit;
  else
    fail("quadrature", "expected LEFT or IMPLICIT");
  s.output = string_or(j, "output", "verify-svi", "");
  if (s.output.empty() || s.output.find("..") != std::string::npos)
    fail("output", "must be a plain relative name");
  return s;
}

}  // namespace svilab
