#include "svilab/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <numbers>
#include <ostream>
#include <sstream>

#include "svilab/config.hpp"
#include "svilab/error.hpp"
#include "svilab/io.hpp"
#include "svilab/measures.hpp"
#include "svilab/soc.hpp"
#include "svilab/svi.hpp"

namespace svilab {

namespace {

using OJson = nlohmann::ordered_json;

// Thrown by command bodies to leave with a given exit code after reporting.
struct Exit {
  int code;
};

Potential read_potential(const std::string& spec) {
  if (!spec.empty() && spec.front() == '{') return potential_from_json(spec);
  if (std::filesystem::is_regular_file(spec)) {
    std::ifstream in(spec);
    std::stringstream ss;
    ss << in.rdbuf();
    return potential_from_json(ss.str());
  }
  return potential_by_name(spec);
}

std::vector<double> parse_probe_grid(const std::string& s) {
  double a = 0, b = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) || b < a ||
      !in.eof())
    throw ParamError("--grid expects a:b:step with step > 0 and a <= b");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  if (count > 1000000) throw ParamError("--grid has too many points");
  std::vector<double> xs;
  for (std::size_t i = 0; i < count; ++i) xs.push_back(a + static_cast<double>(i) * step);
  return xs;
}

void write_manifest(OutputDir& dir, const std::string& command, const Json& config,
                    std::uint64_t seed, const std::string& started) {
  OJson m;
  m["command"] = command;
  m["version"] = version();
  m["seed"] = seed;
  m["config"] = config;
  m["started"] = started;
  m["finished"] = utc_now();
  OJson files = OJson::array();
  for (const WrittenFile& f : dir.files())
    files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"fnv1a64", hex64(f.fnv1a)}});
  m["files"] = files;
  const std::string text = m.dump(2) + "\n";
  dir.write("manifest.json", text);
}

void write_diagnostics(OutputDir& dir, const std::string& error, const std::string& message,
                       OJson extra = OJson::object()) {
  OJson d = std::move(extra);
  d["error"] = error;
  d["message"] = message;
  dir.write("diagnostics.json", d.dump(2) + "\n");
}

// StabilityViolation is a solver abort; other validation failures are input errors.
void validate_or_abort(const SolverConfig& cfg, const std::filesystem::path& out_dir,
                       std::ostream& err) {
  try {
    cfg.validate();
  } catch (const StabilityViolation& e) {
    OutputDir dir(out_dir);
    write_diagnostics(dir, e.name(), e.what());
    err << "solver abort: " << e.name() << ": " << e.what() << "\n";
    throw Exit{kExitSolverAbort};
  }
}

std::string snapshots_csv(const PathEnsemble& ens) {
  std::vector<std::string> header{"path", "t"};
  for (std::size_t i = 1; i <= ens.nodes(); ++i) header.push_back("x" + std::to_string(i));
  CsvTable t(header);
  for (std::size_t p = 0; p < ens.paths.size(); ++p) {
    const std::size_t saves = ens.paths[p].snapshots.size() / ens.nodes();
    for (std::size_t k = 0; k < saves; ++k) {
      std::vector<std::string> row{std::to_string(p), format_number(ens.save_times[k])};
      for (double v : ens.snapshot(p, k)) row.push_back(format_number(v));
      t.add_row(std::move(row));
    }
  }
  return t.str();
}

std::string stats_csv(const PathEnsemble& ens) {
  CsvTable t({"path", "sup_l2_sq", "int_h10_sq", "int_moreau", "int_energy", "failed"});
  for (std::size_t p = 0; p < ens.paths.size(); ++p) {
    const PathRecord& r = ens.paths[p];
    t.add_row({std::to_string(p), format_number(r.sup_l2_sq), format_number(r.int_h10_sq),
               format_number(r.int_moreau), format_number(r.int_energy), r.failed ? "1" : "0"});
  }
  return t.str();
}

std::string summary_csv(const PathEnsemble& ens) {
  const EnergyStats s = energy_stats(ens);
  CsvTable t({"statistic", "mean", "stderr"});
  auto row = [&t](const char* name, const Estimate& e) {
    t.add_row({name, format_number(e.mean), format_number(e.se)});
  };
  row("sup_l2_sq", s.sup_l2_sq);
  row("eps_int_h10_sq", s.eps_int_h10);
  row("int_moreau", s.int_moreau);
  row("int_energy", s.int_energy);
  row("combined", s.combined);
  return t.str();
}

// Reports the first failed path and leaves with the solver-abort code.
void abort_on_failure(const PathEnsemble& ens, OutputDir& dir, std::ostream& err,
                      const std::string& role) {
  for (std::size_t p = 0; p < ens.paths.size(); ++p) {
    const PathRecord& r = ens.paths[p];
    if (!r.failed) continue;
    const auto colon = r.error.find(':');
    const std::string name = r.error.substr(0, colon);
    OJson extra;
    extra["ensemble"] = role;
    extra["path"] = p;
    extra["step"] = r.failed_step;
    write_diagnostics(dir, name, r.error, extra);
    err << "solver abort in " << role << " path " << p << " at step " << r.failed_step << ": "
        << r.error << "\n";
    throw Exit{kExitSolverAbort};
  }
}

// ---------------------------------------------------------------------------

int cmd_convex(const std::string& potential, const std::string& op, double eps,
               const std::string& grid, std::optional<double> at, std::ostream& out) {
  const Potential p = read_potential(potential);
  if (grid.empty() == !at) throw ParamError("give exactly one of --grid or --at");
  const std::vector<double> xs = at ? std::vector<double>{*at} : parse_probe_grid(grid);
  const bool needs_eps = op == "resolvent" || op == "yosida" || op == "moreau";
  std::optional<RegularizedPotential> rp;
  if (needs_eps) {
    if (!(eps > 0.0)) throw ParamError("--eps must be positive");
    rp.emplace(p, eps);
  }
  std::function<std::vector<double>(double)> f;
  std::vector<std::string> header{"x"};
  if (op == "psi") {
    f = [&](double x) { return std::vector<double>{eval_psi(p, x)}; };
    header.push_back("psi");
  } else if (op == "phi") {
    f = [&](double x) {
      const SubdiffInterval s = eval_phi(p, x);
      return std::vector<double>{s.lower, s.upper};
    };
    header.insert(header.end(), {"lower", "upper"});
  } else if (op == "resolvent") {
    f = [&](double x) { return std::vector<double>{resolvent(*rp, x)}; };
    header.push_back("resolvent");
  } else if (op == "yosida") {
    f = [&](double x) { return std::vector<double>{yosida_phi_eps(*rp, x)}; };
    header.push_back("yosida");
  } else if (op == "moreau") {
    f = [&](double x) { return std::vector<double>{moreau_psi_eps(*rp, x)}; };
    header.push_back("moreau");
  } else if (op == "conjugate") {
    f = [&](double x) { return std::vector<double>{conjugate(p, x)}; };
    header.push_back("conjugate");
  } else if (op == "recession") {
    f = [&](double x) { return std::vector<double>{recession(p, x)}; };
    header.push_back("recession");
  } else if (op == "recession_conjugate") {
    f = [&](double x) { return std::vector<double>{recession_conjugate(p, x)}; };
    header.push_back("recession_conjugate");
  } else {
    throw ParamError("unknown --op '" + op + "'");
  }
  CsvTable t(header);
  for (double x : xs) {
    std::vector<double> row{x};
    for (double v : f(x)) row.push_back(v);
    t.add_row(row);
  }
  out << t.str();
  return kExitOk;
}

int cmd_simulate(const std::string& path, std::optional<unsigned> threads, std::ostream& out,
                 std::ostream& err) {
  const std::string started = utc_now();
  RunConfig rc = parse_run_config(read_json_file(path), "simulate");
  if (threads) rc.solver.threads = *threads;
  const auto dir_path = output_root() / rc.output;
  validate_or_abort(rc.solver, dir_path, err);
  const PathEnsemble ens = simulate(rc.solver, rc.initial);
  OutputDir dir(dir_path);
  dir.write("snapshots.csv", snapshots_csv(ens));
  dir.write("stats.csv", stats_csv(ens));
  dir.write("summary.csv", summary_csv(ens));
  abort_on_failure(ens, dir, err, "candidate");
  write_manifest(dir, "simulate", rc.raw, rc.solver.noise.seed, started);
  out << "wrote " << dir.files().size() << " files to " << dir.path().string() << "\n";
  return kExitOk;
}

int cmd_verify_svi(const std::string& path, std::optional<unsigned> threads, std::ostream& out,
                   std::ostream& err) {
  const std::string started = utc_now();
  SviRunConfig sc = parse_svi_config(read_json_file(path));
  SolverConfig& cfg = sc.candidate.solver;
  if (threads) cfg.threads = *threads;
  cfg.keep_snapshots = true;
  const auto dir_path = output_root() / sc.output;
  validate_or_abort(cfg, dir_path, err);
  for (const TestSpec& t : sc.tests)
    if (t.self && cfg.cadence() != 1)
      throw ConfigError("tests: SELF needs candidate.snapshot_every = 1");

  const PathEnsemble x = simulate(cfg, sc.candidate.initial);
  OutputDir dir(dir_path);
  abort_on_failure(x, dir, err, "candidate");
  const EnergyFunctional f(cfg.potential);

  OJson verdict;
  verdict["C"] = sc.C;
  verdict["stderr_factor"] = sc.stderr_factor;
  verdict["quadrature"] = sc.quadrature == Quadrature::Left ? "LEFT" : "IMPLICIT";
  OJson tests = OJson::array();
  bool all = true;
  for (std::size_t i = 0; i < sc.tests.size(); ++i) {
    const TestSpec& ts = sc.tests[i];
    const TestProcess tp = ts.self ? test_process_from_ensemble(x)
                                   : build_test_process(ts.kind, cfg, ts.z0, ts.G, ts.inner_eps);
    abort_on_failure(tp.z, dir, err, ts.label);
    const SviReport r = svi_margin(x, tp, f, sc.C, sc.quadrature);
    CsvTable t({"t", "lhs", "rhs", "margin", "stderr"});
    for (std::size_t k = 0; k < r.t.size(); ++k)
      t.add_row(std::vector<double>{r.t[k], r.lhs[k].mean, r.rhs[k].mean, r.margin[k].mean,
                                    r.margin[k].se});
    const std::string name = "svi_" + std::to_string(i) + "_" + ts.label + ".csv";
    dir.write(name, t.str());
    const bool ok = r.holds(sc.stderr_factor);
    all = all && ok;
    tests.push_back({{"label", ts.label},
                     {"kind", ts.self ? "SELF" : to_string(ts.kind)},
                     {"holds", ok},
                     {"worst_margin_over_stderr", r.worst_z()},
                     {"paths_used", r.paths_used},
                     {"table", name}});
    out << ts.label << ": " << (ok ? "holds" : "VIOLATED") << " (worst margin/stderr "
        << format_number(r.worst_z()) << ")\n";
  }
  verdict["tests"] = tests;
  verdict["verdict"] = all ? "pass" : "fail";
  dir.write("verdict.json", verdict.dump(2) + "\n");
  write_manifest(dir, "verify-svi", sc.raw, cfg.noise.seed, started);
  return all ? kExitOk : kExitInequality;
}

int cmd_approx_demo(const std::vector<std::string>& atoms, double density,
                    const std::string& potential, std::size_t cells, double a, double b,
                    const std::vector<std::size_t>& ns, std::ostream& out) {
  const Potential p = read_potential(potential);
  const Grid grid(a, b, cells);
  std::vector<Atom> list;
  for (const std::string& s : atoms) {
    const auto c = s.find(':');
    if (c == std::string::npos) throw ParamError("--atom expects x:mass");
    try {
      list.push_back({std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))});
    } catch (const std::exception&) {
      throw ParamError("--atom expects x:mass");
    }
  }
  const RadonMeasure mu = RadonMeasure::from_density(grid, [density](double) { return density; }, list);
  const EnergyFunctional f(p);
  const double len = grid.length();
  const auto eta1 = [&](double x) { return std::sin(std::numbers::pi * (x - a) / len); };
  const auto eta2 = [&](double x) { return std::sin(2.0 * std::numbers::pi * (x - a) / len); };
  const double ref1 = pairing(mu, eta1), ref2 = pairing(mu, eta2);
  const Field s1 = Field::sample(grid, eta1), s2 = Field::sample(grid, eta2);
  CsvTable t({"n", "energy", "target_energy", "gap_sin1", "gap_sin2"});
  const double target = energy(f, mu);
  for (std::size_t n : ns) {
    if (n < 1) throw ParamError("--n entries must be >= 1");
    const Field u = approx_sequence(mu, n);
    const double h = grid.spacing();
    double g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      g1 += h * u.values[i] * s1.values[i];
      g2 += h * u.values[i] * s2.values[i];
    }
    t.add_row(std::vector<double>{static_cast<double>(n), energy(f, u), target, std::fabs(g1 - ref1),
                                  std::fabs(g2 - ref2)});
  }
  out << t.str();
  return kExitOk;
}

int cmd_soc_stats(const std::string& path, std::optional<unsigned> threads, std::ostream& out,
                  std::ostream& err) {
  const std::string started = utc_now();
  RunConfig rc = parse_run_config(read_json_file(path), "soc-stats", {"threshold"});
  if (rc.solver.potential.kind() != PotentialKind::Psi1)
    throw ConfigError("potential: soc-stats runs with psi1");
  if (rc.solver.noise.multiplier != Multiplier::Additive)
    throw ConfigError("noise.multiplier: soc-stats runs with additive noise");
  if (threads) rc.solver.threads = *threads;
  rc.solver.keep_snapshots = true;
  const auto dir_path = output_root() / rc.output;
  validate_or_abort(rc.solver, dir_path, err);
  const PathEnsemble ens = simulate(rc.solver, rc.initial);
  OutputDir dir(dir_path);
  const auto events = detect_clusters(ens, rc.threshold);
  CsvTable ev({"path", "save", "t", "first", "size", "excess"});
  for (const ClusterEvent& e : events)
    ev.add_row({std::to_string(e.path), std::to_string(e.save), format_number(e.t),
                std::to_string(e.first), std::to_string(e.size), format_number(e.excess)});
  dir.write("events.csv", ev.str());
  CsvTable hist({"size", "count", "cumulative"});
  for (const HistogramBin& b : size_histogram(events))
    hist.add_row({std::to_string(b.size), std::to_string(b.count), std::to_string(b.cumulative)});
  dir.write("histogram.csv", hist.str());
  abort_on_failure(ens, dir, err, "candidate");
  write_manifest(dir, "soc-stats", rc.raw, rc.solver.noise.seed, started);
  out << events.size() << " cluster events written to " << dir.path().string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic porous-medium laboratory", "svilab"};
  app.require_subcommand(1);

  std::string potential, op = "psi", grid;
  double eps = 0.5;
  std::optional<double> at;
  auto* convex = app.add_subcommand("convex", "Tabulate ψ, φ, φ^ε, ψ^ε, ψ*, ψ_∞ on probe points");
  convex->add_option("--potential", potential, "Builtin name, JSON record or JSON file")->required();
  convex->add_option("--op", op, "psi|phi|resolvent|yosida|moreau|conjugate|recession|recession_conjugate");
  convex->add_option("--eps", eps, "Regularization for resolvent, yosida, moreau");
  convex->add_option("--grid", grid, "Probe grid a:b:step");
  convex->add_option("--at", at, "Single probe point");

  std::string config;
  std::optional<unsigned> threads;
  auto add_run = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("config", config, "JSON experiment file")->required();
    c->add_option("--threads", threads, "Worker threads over paths (0 = all cores)");
    return c;
  };
  auto* sim = add_run("simulate", "Run a path ensemble and write snapshots and statistics");
  auto* svi = add_run("verify-svi", "Estimate the variational inequality against test processes");
  auto* soc = add_run("soc-stats", "Log supercritical clusters and their size histogram");

  std::vector<std::string> atoms;
  double density = 0.0, a = 0.0, b = 1.0;
  std::size_t cells = 1024;
  std::vector<std::size_t> ns{4, 8, 16, 32, 64, 128, 256};
  std::string demo_potential = "psi1";
  auto* demo = app.add_subcommand("approx-demo", "Energies and pairing gaps of the smoothing sequence");
  demo->add_option("--atom", atoms, "Atom x:mass (repeatable)");
  demo->add_option("--density", density, "Constant density");
  demo->add_option("--potential", demo_potential, "Builtin name, JSON record or JSON file");
  demo->add_option("--cells", cells, "Grid cells");
  demo->add_option("--a", a, "Left endpoint");
  demo->add_option("--b", b, "Right endpoint");
  demo->add_option("--n", ns, "Sequence indices")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitMalformed;
  }

  try {
    if (*convex) return cmd_convex(potential, op, eps, grid, at, out);
    if (*sim) return cmd_simulate(config, threads, out, err);
    if (*svi) return cmd_verify_svi(config, threads, out, err);
    if (*demo) return cmd_approx_demo(atoms, density, demo_potential, cells, a, b, ns, out);
    if (*soc) return cmd_soc_stats(config, threads, out, err);
  } catch (const Exit& e) {
    return e.code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const ParamError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const GrowthClassError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const AlignmentError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const Error& e) {
    err << "solver abort: " << e.name() << ": " << e.what() << "\n";
    return kExitSolverAbort;
  }
  return kExitMalformed;
}

}  // namespace svilab
