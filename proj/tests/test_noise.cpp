#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "svilab/error.hpp"
#include "svilab/noise.hpp"

using namespace svilab;

namespace {

NoiseConfig additive(std::size_t modes = 16, std::uint64_t seed = 1) {
  NoiseConfig c;
  c.modes = modes;
  c.seed = seed;
  return c;
}

NoiseConfig diagonal(double gain = 1.0, std::uint64_t seed = 1) {
  NoiseConfig c;
  c.multiplier = Multiplier::LipschitzDiagonal;
  c.gain = gain;
  c.seed = seed;
  return c;
}

std::vector<Field> random_fields(const Grid& g, std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> N(0.0, scale);
  std::vector<Field> out;
  for (int i = 0; i < n; ++i) {
    Field u(g);
    for (double& v : u.values) v = N(rng);
    out.push_back(std::move(u));
  }
  return out;
}

/// Σᵢ ‖g bᵢ m ⊙ eᵢ‖² in H⁻¹ by dense solves.
double hs_sq_oracle(const NoiseModel& nm, const std::vector<double>& mult) {
  const double h = nm.grid().spacing();
  double s = 0.0;
  for (std::size_t i = 0; i < nm.modes(); ++i) {
    std::vector<double> col(mult.size());
    for (std::size_t j = 0; j < col.size(); ++j)
      col[j] = nm.config().gain * nm.weight(i) * mult[j] * nm.basis()[i][j];
    s += oracle::hminus1_inner(col, col, h);
  }
  return s;
}

}  // namespace

TEST_CASE("increments are centred with variance dt") {
  const Grid g(0.0, 1.0, 64);
  const NoiseModel nm(g, additive(16, 42));
  const double dt = 0.01;
  const int n = 100000;
  std::vector<double> mean(16, 0.0), sq(16, 0.0);
  for (int p = 0; p < n; ++p) {
    const WienerIncrement w = nm.sample_increment(dt, static_cast<std::uint64_t>(p), 3);
    CHECK(w.dt == dt);
    for (std::size_t i = 0; i < 16; ++i) mean[i] += w.gaussians[i], sq[i] += w.gaussians[i] * w.gaussians[i];
  }
  for (std::size_t i = 0; i < 16; ++i) {
    const double m = mean[i] / n;
    CHECK(std::fabs(m) <= 4.0 * std::sqrt(dt / n));
    CHECK(std::fabs(sq[i] / n - m * m - dt) <= 0.05 * dt);
  }
  CHECK_THROWS_AS(nm.sample_increment(0.0, 0, 0), ParamError);
}

TEST_CASE("increments are reproducible and keyed by path and step") {
  const Grid g(0.0, 1.0, 64);
  const NoiseModel a(g, additive(16, 7)), b(g, additive(16, 7)), c(g, additive(16, 8));
  CHECK(a.sample_increment(0.1, 5, 9).gaussians == b.sample_increment(0.1, 5, 9).gaussians);
  CHECK(a.sample_increment(0.1, 5, 9).gaussians != c.sample_increment(0.1, 5, 9).gaussians);
  CHECK(a.sample_increment(0.1, 5, 9).gaussians != a.sample_increment(0.1, 6, 9).gaussians);
  CHECK(a.sample_increment(0.1, 5, 9).gaussians != a.sample_increment(0.1, 5, 10).gaussians);
  // order of generation is irrelevant
  const auto late = a.sample_increment(0.1, 1000, 1000).gaussians;
  for (int i = 0; i < 100; ++i) (void)a.sample_increment(0.1, static_cast<std::uint64_t>(i), 0);
  CHECK(a.sample_increment(0.1, 1000, 1000).gaussians == late);

  std::set<double> seen;
  for (std::uint64_t p = 0; p < 50; ++p)
    for (std::uint64_t s = 0; s < 50; ++s) {
      std::vector<double> z(4);
      counter_normals(3, p, s, z);
      for (double v : z) seen.insert(v);
    }
  CHECK(seen.size() == 50 * 50 * 4);
}

TEST_CASE("standard normals pass a coarse distribution check") {
  std::vector<double> z(200000);
  counter_normals(99, 0, 0, z);
  int within1 = 0, within2 = 0;
  double m4 = 0.0;
  for (double v : z) {
    within1 += std::fabs(v) < 1.0;
    within2 += std::fabs(v) < 2.0;
    m4 += v * v * v * v;
  }
  CHECK(within1 / 200000.0 == doctest::Approx(0.682689).epsilon(0.01));
  CHECK(within2 / 200000.0 == doctest::Approx(0.954500).epsilon(0.005));
  CHECK(m4 / 200000.0 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("diffusion coefficient examples") {
  const Grid g(0.0, 1.0, 64);
  const NoiseModel nm(g, additive());
  const Field x = Field::sample(g, [](double s) { return std::sin(3 * s); });
  WienerIncrement zero{0.01, std::vector<double>(16, 0.0)};
  for (double v : nm.apply_B(0.0, x, zero).values) CHECK(v == 0.0);

  NoiseConfig one;
  one.modes = 1;
  one.weights = {1.0};
  const NoiseModel single(g, one);
  const Field b = single.apply_B(0.0, x, WienerIncrement{0.01, {1.0}});
  const Field e1 = sine_mode(g, 1);
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(b[i] == e1[i]);

  const NoiseModel diag(g, diagonal());
  WienerIncrement w = diag.sample_increment(0.01, 0, 0);
  for (double v : diag.apply_B(0.0, Field(g), w).values) CHECK(v == 0.0);

  // linear in dw
  const NoiseModel d2(g, diagonal(2.0));
  WienerIncrement w2 = w;
  for (double& v : w2.gaussians) v *= -3.0;
  const Field p = d2.apply_B(0.0, x, w), q = d2.apply_B(0.0, x, w2);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == doctest::Approx(-3.0 * p[i]).epsilon(1e-13));

  CHECK_THROWS_AS(nm.apply_B(0.0, Field(Grid(0, 1, 32)), zero), GridMismatch);
  CHECK_THROWS_AS(nm.apply_B(0.0, x, WienerIncrement{0.01, {1.0}}), ParamError);
}

TEST_CASE("noise model validation") {
  const Grid g(0.0, 1.0, 16);
  NoiseConfig c;
  c.modes = 0;
  CHECK_THROWS_AS(NoiseModel(g, c), ParamError);
  c.modes = 16;
  CHECK_THROWS_AS(NoiseModel(g, c), ModeOutOfRange);
  c.modes = 3;
  c.weights = {1.0, 2.0};
  CHECK_THROWS_AS(NoiseModel(g, c), ParamError);
  c.weights = {1.0, -2.0, 1.0};
  CHECK_THROWS_AS(NoiseModel(g, c), ParamError);
  c.weights = {};
  c.gain = -1.0;
  CHECK_THROWS_AS(NoiseModel(g, c), ParamError);
  c.gain = 1.0;
  c.sigma_cap = 0.0;
  CHECK_THROWS_AS(NoiseModel(g, c), ParamError);
  NoiseConfig four;
  four.modes = 4;
  const NoiseModel def(g, four);
  CHECK(def.weight(3) == 0.25);
}

TEST_CASE("Hilbert-Schmidt norms against dense solves") {
  std::mt19937_64 rng(5);
  const Grid g(0.0, 1.0, 40);
  const DirichletLaplacian L(g);
  for (const NoiseConfig& cfg : {additive(10), diagonal(1.5)}) {
    const NoiseModel nm(g, cfg);
    for (const Field& v : random_fields(g, rng, 5, 1.0)) {
      std::vector<double> mult(v.size());
      for (std::size_t j = 0; j < mult.size(); ++j) mult[j] = nm.sigma(v[j]);
      CHECK(hs_norm_sq(nm, L, v.span(), false) == doctest::Approx(hs_sq_oracle(nm, mult)).epsilon(1e-10));
    }
  }
  const NoiseModel nm(g, additive(10));
  CHECK(hs_norm_sq(nm, L, Field(g).span(), false) == doctest::Approx(nm.hs_sq_hminus1_additive()).epsilon(1e-12));
}

TEST_CASE("checked noise conditions") {
  std::mt19937_64 rng(6);
  const Grid g(0.0, 1.0, 64);
  const auto samples = random_fields(g, rng, 30, 1.0);

  const NoiseReport add = check_noise_conditions(NoiseModel(g, additive()), samples);
  CHECK(add.lipschitz_hminus1 == 0.0);
  CHECK(add.lipschitz_l2 == 0.0);
  CHECK(add.growth <= add.declared_growth);
  CHECK(add.b0_sq == doctest::Approx(add.declared_b0_sq).epsilon(1e-12));
  CHECK_FALSE(add.violation);

  for (double gain : {0.5, 1.0, 4.0}) {
    const NoiseModel nm(g, diagonal(gain));
    const NoiseReport r = check_noise_conditions(nm, samples);
    CHECK(r.lipschitz_l2 > 0.0);
    CHECK(r.lipschitz_l2 <= r.declared_lipschitz_l2 + 1e-6);
    CHECK(r.growth <= r.declared_growth);
    CHECK(r.b0_sq == 0.0);
    CHECK_FALSE(r.violation);
    // declared bound: gain · Lip(σ) · sqrt(Σ bᵢ² ‖eᵢ‖²_∞)
    double sw = 0.0;
    for (std::size_t i = 0; i < nm.modes(); ++i) {
      double m = 0.0;
      for (double v : nm.basis()[i].values) m = std::max(m, std::fabs(v));
      sw += nm.weight(i) * nm.weight(i) * m * m;
    }
    CHECK(r.declared_lipschitz_l2 == doctest::Approx(gain * std::sqrt(sw)).epsilon(1e-12));
  }
}

TEST_CASE("Ito isometry for additive noise") {
  const Grid g(0.0, 1.0, 32);
  const DirichletLaplacian L(g);
  NoiseConfig cfg = additive(8, 2024);
  cfg.gain = 0.7;
  const NoiseModel nm(g, cfg);
  const double T = 1.0, dt = 1.0 / 32;
  const int steps = 32, paths = 10000;
  double acc_h = 0.0, acc_l = 0.0;
  std::vector<double> dw(nm.modes()), out(g.size());
  for (int p = 0; p < paths; ++p) {
    Field sum(g);
    for (int s = 0; s < steps; ++s) {
      nm.draw(static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(s), dt, dw);
      nm.apply(sum.span(), dw, out);
      for (std::size_t j = 0; j < out.size(); ++j) sum[j] += out[j];
    }
    const double nh = hminus1_norm(L, sum), nl = l2_norm(sum);
    acc_h += nh * nh, acc_l += nl * nl;
  }
  double expect_l = 0.0;
  for (std::size_t i = 0; i < nm.modes(); ++i) {
    const double e = l2_norm(nm.basis()[i]);
    expect_l += nm.weight(i) * nm.weight(i) * e * e;
  }
  expect_l *= T * cfg.gain * cfg.gain;
  const double expect_h = T * nm.hs_sq_hminus1_additive();
  CHECK(std::fabs(acc_h / paths / expect_h - 1.0) <= 0.05);
  CHECK(std::fabs(acc_l / paths / expect_l - 1.0) <= 0.05);
}
