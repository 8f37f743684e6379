#pragma once

// JSON experiment files. Every object is checked against its key set and
// every value against its range before anything runs; problems surface as
// ConfigError naming the offending path, e.g. "noise.gain".
//
//   {
//     "grid": {"a": 0, "b": 1, "cells": 64},
//     "potential": "psi1",
//     "eps": 0.05, "dt": 0.00390625, "t_end": 1,
//     "scheme": "IMPLICIT_MONOTONE",
//     "newton": {"tol": 1e-10, "max_iter": 200},
//     "noise": {"modes": 16, "weights": "inverse", "multiplier": "ADDITIVE",
//               "gain": 1, "sigma_cap": 1, "seed": 0},
//     "paths": 100, "snapshot_every": 0, "threads": 1, "K": 0,
//     "initial": {"kind": "sine", "amplitude": 1.5, "mode": 1},
//     "output": "run"
//   }

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "svilab/solver.hpp"
#include "svilab/svi.hpp"

namespace svilab {

using Json = nlohmann::json;

/// Parses a file; ConfigError on I/O or syntax errors.
Json read_json_file(const std::filesystem::path& path);

/// Grid, potential, scheme, Newton controls, noise, paths, cadence, threads, K.
/// Runs SolverConfig::validate() only when `validate` is set.
SolverConfig parse_solver_config(const Json& j, bool validate = true);

/// Initial or drift field on `grid`:
///   {"kind": "zero"}
///   {"kind": "sine", "amplitude": A, "mode": k}          A sin(kπ(x−a)/(b−a))
///   {"kind": "values", "values": [...]}                  interior nodes
///   {"kind": "laplacian", "of": <field spec>}            discrete Δ of a field
///   {"kind": "measure", "atoms": [[x, m], ...], "density": c, "n": 64}
///                                                        approx_sequence term n
Field parse_field(const Grid& grid, const Json& j, const std::string& where = "initial");

struct RunConfig {
  SolverConfig solver;
  Field initial{Grid(0.0, 1.0, 4)};
  std::string output;
  /// Cluster threshold of soc-stats.
  double threshold = 1.0;
  Json raw;
};

/// `extra_keys` are accepted at top level in addition to the solver keys.
RunConfig parse_run_config(const Json& j, const std::string& default_output,
                           const std::vector<std::string>& extra_keys = {});

struct TestSpec {
  /// "SELF" wraps the candidate itself (X ≡ Z).
  bool self = false;
  DriftKind kind = DriftKind::Zero;
  Field z0{Grid(0.0, 1.0, 4)};
  std::optional<Field> G;
  std::optional<double> inner_eps;
  std::string label;
};

struct SviRunConfig {
  RunConfig candidate;
  std::vector<TestSpec> tests;
  double C = 0.0;
  double stderr_factor = 2.0;
  Quadrature quadrature = Quadrature::Left;
  std::string output;
  Json raw;
};

/// {"candidate": <run config>, "tests": [{"kind": "ZERO"|"CONSTANT_G"|
///  "REGULARIZED_SOLUTION"|"SELF", "z0": <field>, "G": <field>, "eps": e}],
///  "C": c, "stderr_factor": 2, "quadrature": "LEFT"|"IMPLICIT", "output": name}
SviRunConfig parse_svi_config(const Json& j);

Scheme scheme_from_string(const std::string& s);
Multiplier multiplier_from_string(const std::string& s);
DriftKind drift_kind_from_string(const std::string& s);

}  // namespace svilab
