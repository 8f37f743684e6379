#include <doctest.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "svilab/config.hpp"
#include "svilab/error.hpp"
#include "svilab/io.hpp"
#include "svilab/measures.hpp"

using namespace svilab;
using std::numbers::pi;

namespace {

/// The ConfigError message for `j`, or "" when it parses.
std::string run_error(const Json& j) {
  try {
    (void)parse_run_config(j, "x");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string svi_error(const Json& j) {
  try {
    (void)parse_svi_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("numbers round-trip through text") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  int tried = 0;
  while (tried < 10000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    ++tried;
    const std::string s = format_number(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(std::memcmp(&back, &v, sizeof v) == 0);
  }
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(INFINITY) == "inf");
  CHECK(format_number(-INFINITY) == "-inf");
  CHECK(format_number(NAN) == "nan");
}

TEST_CASE("comma-separated tables") {
  CsvTable t({"a", "b"});
  t.add_row(std::vector<double>{1.0, 0.25});
  t.add_row(std::vector<std::string>{"x", "y"});
  CHECK(t.rows() == 2);
  CHECK(t.str() == "a,b\n1,0.25\nx,y\n");
  CHECK_THROWS_AS(t.add_row(std::vector<double>{1.0}), ParamError);
}

TEST_CASE("output directories record what they write") {
  const auto root = std::filesystem::temp_directory_path() / "svilab_io_test";
  std::filesystem::remove_all(root);
  OutputDir d(root / "nested" / "run");
  d.write("a.csv", "hello");
  d.write("b.csv", "");
  REQUIRE(d.files().size() == 2);
  CHECK(d.files()[0].bytes == 5);
  CHECK(d.files()[0].fnv1a == fnv1a64("hello"));
  std::ifstream in(d.path() / "a.csv");
  std::string s;
  in >> s;
  CHECK(s == "hello");
  std::filesystem::remove_all(root);

  const char* old = std::getenv("SVILAB_OUTPUT_ROOT");
  const std::string saved = old ? old : "";
  setenv("SVILAB_OUTPUT_ROOT", "/tmp/elsewhere", 1);
  CHECK(output_root() == std::filesystem::path("/tmp/elsewhere"));
  unsetenv("SVILAB_OUTPUT_ROOT");
  CHECK(output_root() == std::filesystem::path("svilab_out"));
  CHECK(output_root("x") == std::filesystem::path("x"));
  if (old) setenv("SVILAB_OUTPUT_ROOT", saved.c_str(), 1);
  CHECK(utc_now().size() == 20);
}

TEST_CASE("solver configuration from JSON") {
  const Json j = Json::parse(R"({
    "grid": {"a": -1, "b": 2, "cells": 48}, "potential": "psi2", "eps": 0.2, "dt": 0.01,
    "t_end": 0.5, "scheme": "implicit_monotone", "newton": {"tol": 1e-9, "max_iter": 50},
    "noise": {"modes": 5, "weights": [1, 0.5, 0.25, 0, 1], "multiplier": "LIPSCHITZ_DIAGONAL",
              "gain": 2, "sigma_cap": 3, "seed": 99},
    "paths": 7, "snapshot_every": 4, "threads": 2, "K": 1.5})");
  const SolverConfig c = parse_solver_config(j);
  CHECK(c.grid == Grid(-1.0, 2.0, 48));
  CHECK(c.potential.kind() == PotentialKind::Psi2);
  CHECK(c.eps == 0.2);
  CHECK(c.newton_tol == 1e-9);
  CHECK(c.newton_max_iter == 50);
  CHECK(c.noise.modes == 5);
  CHECK(c.noise.weights == std::vector<double>{1, 0.5, 0.25, 0, 1});
  CHECK(c.noise.multiplier == Multiplier::LipschitzDiagonal);
  CHECK(c.noise.gain == 2.0);
  CHECK(c.noise.sigma_cap == 3.0);
  CHECK(c.noise.seed == 99);
  CHECK(c.paths == 7);
  CHECK(c.snapshot_every == 4);
  CHECK(c.threads == 2);
  CHECK(c.K == 1.5);

  const Json custom = Json::parse(R"({"potential": {"kind": "custom", "breakpoints": [1],
      "pieces": [[0], [-1, 1]], "growth_constant": 1, "witness_y": 2}})");
  CHECK_NOTHROW(parse_solver_config(custom));
  CHECK_THROWS_AS(parse_solver_config(Json::parse(R"({"scheme": "SEMI_IMPLICIT"})")), StabilityViolation);
  CHECK_NOTHROW(parse_solver_config(Json::parse(R"({"scheme": "SEMI_IMPLICIT"})"), false));
}

TEST_CASE("configuration errors name the offending key") {
  CHECK(starts_with(run_error(Json::parse(R"({"bogus": 1})")), "bogus"));
  CHECK(starts_with(run_error(Json::parse(R"({"noise": {"gain": -1}})")), "noise.gain"));
  CHECK(starts_with(run_error(Json::parse(R"({"noise": {"modes": 64}})")), "noise.modes"));
  CHECK(starts_with(run_error(Json::parse(R"({"noise": {"weights": [1, 2]}})")), "noise.weights"));
  CHECK(starts_with(run_error(Json::parse(R"({"noise": {"multiplier": "CUBIC"}})")), "noise.multiplier"));
  CHECK(starts_with(run_error(Json::parse(R"({"grid": {"cells": 2}})")), "grid"));
  CHECK(starts_with(run_error(Json::parse(R"({"eps": "big"})")), "eps"));
  CHECK(starts_with(run_error(Json::parse(R"({"eps": 0})")), "eps"));
  CHECK(starts_with(run_error(Json::parse(R"({"paths": 0})")), "paths"));
  CHECK(starts_with(run_error(Json::parse(R"({"paths": 1.5})")), "paths"));
  CHECK(starts_with(run_error(Json::parse(R"({"K": -1})")), "K"));
  CHECK(starts_with(run_error(Json::parse(R"({"newton": {"tol": 0}})")), "newton.tol"));
  CHECK(starts_with(run_error(Json::parse(R"({"scheme": "RK4"})")), "scheme"));
  CHECK(starts_with(run_error(Json::parse(R"({"potential": "psi9"})")), "potential"));
  CHECK(starts_with(run_error(Json::parse(R"({"output": "../escape"})")), "output"));
  CHECK(starts_with(run_error(Json::parse(R"({"threshold": 2})")), "threshold"));
  CHECK(starts_with(run_error(Json::parse(R"({"initial": {"kind": "sine", "mode": 0}})")), "initial.mode"));
  CHECK(starts_with(run_error(Json::parse(R"({"initial": {"kind": "values", "values": [1, 2]}})")),
                    "initial.values"));
  CHECK(starts_with(run_error(Json::parse(R"({"initial": {"kind": "spline"}})")), "initial.kind"));
  CHECK(run_error(Json::parse("{}")).empty());
  CHECK_NOTHROW(parse_run_config(Json::parse(R"({"threshold": 2})"), "x", {"threshold"}));

  CHECK_THROWS_AS(read_json_file("/nonexistent/file.json"), ConfigError);
  const auto bad = std::filesystem::temp_directory_path() / "svilab_bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(read_json_file(bad), ConfigError);
  std::filesystem::remove(bad);
}

TEST_CASE("field specifications") {
  const Grid g(0.0, 2.0, 64);
  const Field s = parse_field(g, Json::parse(R"({"kind": "sine", "amplitude": 3, "mode": 2})"));
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(3.0 * std::sin(2 * pi * g.node(i) / 2.0)));
  CHECK(l2_norm(parse_field(g, Json::parse(R"({"kind": "zero"})"))) == 0.0);

  Json vals = {{"kind", "values"}, {"values", std::vector<double>(63, 0.5)}};
  CHECK(parse_field(g, vals)[10] == 0.5);

  const Field lap = parse_field(g, Json::parse(R"({"kind": "laplacian", "of": {"kind": "sine", "mode": 1}})"));
  const Field ref = laplacian_apply(DirichletLaplacian(g), Field::sample(g, [](double x) { return std::sin(pi * x / 2.0); }));
  for (std::size_t i = 0; i < lap.size(); ++i) CHECK(lap[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  const Field m = parse_field(g, Json::parse(R"({"kind": "measure", "atoms": [[1.0, 1.0]], "density": 0.5, "n": 16})"));
  const RadonMeasure mu = RadonMeasure::from_density(g, [](double) { return 0.5; }, {{1.0, 1.0}});
  CHECK(m.values == approx_sequence(mu, 16).values);
}

TEST_CASE("inequality run configuration") {
  const Json base = Json::parse(R"({
    "candidate": {"grid": {"cells": 32}, "snapshot_every": 1},
    "tests": [{"kind": "zero", "z0": {"kind": "zero"}},
              {"kind": "CONSTANT_G", "z0": {"kind": "zero"}, "G": {"kind": "sine"}, "label": "g"},
              {"kind": "REGULARIZED_SOLUTION", "z0": {"kind": "zero"}, "eps": 0.3},
              {"kind": "SELF"}],
    "C": 4, "quadrature": "implicit"})");
  const SviRunConfig s = parse_svi_config(base);
  REQUIRE(s.tests.size() == 4);
  CHECK(s.tests[0].kind == DriftKind::Zero);
  CHECK(s.tests[0].label == "ZERO");
  CHECK(s.tests[1].G.has_value());
  CHECK(s.tests[1].label == "g");
  CHECK(*s.tests[2].inner_eps == 0.3);
  CHECK(s.tests[3].self);
  CHECK(s.C == 4.0);
  CHECK(s.stderr_factor == 2.0);
  CHECK(s.quadrature == Quadrature::Implicit);
  CHECK(s.output == "verify-svi");
  CHECK(s.candidate.output == "candidate");

  auto with = [&](const char* ptr, Json v) {
    Json j = base;
    j[Json::json_pointer(ptr)] = std::move(v);
    return svi_error(j);
  };
  auto without = [&](const char* ptr) {
    Json j = base;
    const Json::json_pointer p(ptr);
    j[p.parent_pointer()].erase(p.back());
    return svi_error(j);
  };
  CHECK(starts_with(without("/C"), "C"));
  CHECK(starts_with(with("/C", -1), "C"));
  CHECK(starts_with(with("/quadrature", "MIDPOINT"), "quadrature"));
  CHECK(starts_with(with("/tests", Json::array()), "tests"));
  CHECK(starts_with(with("/tests/0/kind", "BROWNIAN"), "tests.kind"));
  CHECK(starts_with(without("/tests/1/G"), "tests[1].G"));
  CHECK(starts_with(with("/tests/0/G", Json::parse(R"({"kind": "zero"})")), "tests[0].G"));
  CHECK(starts_with(without("/tests/2/eps"), "tests[2].eps"));
  CHECK(starts_with(with("/tests/2/eps", 0), "tests[2].eps"));
  CHECK(starts_with(with("/tests/3/z0", Json::parse(R"({"kind": "zero"})")), "tests[3]"));
  CHECK(starts_with(without("/tests/0/z0"), "tests[0].z0"));
  CHECK(starts_with(with("/candidate/eps", -1), "eps"));
  CHECK(starts_with(with("/extra", 1), "extra"));
}
