#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support/oracles.hpp"
#include "svilab/error.hpp"
#include "svilab/solver.hpp"

using namespace svilab;
using std::numbers::pi;

namespace {

SolverConfig base(std::size_t cells, double eps, double dt, double t_end, Potential psi = Potential::psi1()) {
  SolverConfig c;
  c.grid = Grid(0.0, 1.0, cells);
  c.potential = std::move(psi);
  c.eps = eps;
  c.dt = dt;
  c.t_end = t_end;
  c.noise.gain = 0.0;
  return c;
}

Field random_field(const Grid& g, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> N(0.0, scale);
  Field u(g);
  for (double& v : u.values) v = N(rng);
  return u;
}

std::vector<double> zero_dw(const SolverConfig& c) { return std::vector<double>(c.noise.modes, 0.0); }

double hm1_dist(const DirichletLaplacian& L, std::span<const double> a, std::span<const double> b) {
  Field d(L.grid());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return hminus1_norm(L, d);
}

double sup_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

/// Nodal residual y − x − dt Δ(εy + φ^ε(y)) measured in H⁻¹ by a dense solve.
double dense_residual(const SolverConfig& c, std::span<const double> x, std::span<const double> y) {
  const RegularizedPotential rp(c.potential, c.eps);
  const std::size_t n = x.size();
  const auto A = oracle::neg_laplacian(n, c.grid.spacing());
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = c.eps * y[i] + yosida_phi_eps(rp, y[i]);
  const auto Ag = oracle::matvec(A, g);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - x[i] + c.dt * Ag[i];
  return std::sqrt(oracle::hminus1_inner(r, r, c.grid.spacing()));
}

}  // namespace

TEST_CASE("configuration validation and schedule") {
  SolverConfig c = base(32, 0.1, 0.1, 1.0);
  CHECK_NOTHROW(c.validate());
  CHECK(c.steps() == 10);
  CHECK(c.cadence() == 1);
  c.snapshot_every = 3;
  const auto t = save_schedule(c);
  REQUIRE(t.size() == 5);
  CHECK(t[0] == 0.0);
  CHECK(t[1] == doctest::Approx(0.3));
  CHECK(t[3] == doctest::Approx(0.9));
  CHECK(t[4] == doctest::Approx(1.0));
  CHECK(base(32, 0.1, 1e-3, 1.0).cadence() == 3);

  auto bad = [&](auto mutate) {
    SolverConfig b = base(32, 0.1, 0.1, 1.0);
    mutate(b);
    CHECK_THROWS_AS(b.validate(), ParamError);
  };
  bad([](SolverConfig& b) { b.eps = 0.0; });
  bad([](SolverConfig& b) { b.dt = -1.0; });
  bad([](SolverConfig& b) { b.t_end = 0.95; b.dt = 0.1; b.t_end = 0.25; });
  bad([](SolverConfig& b) { b.dt = 2.0; });
  bad([](SolverConfig& b) { b.newton_tol = 0.0; });
  bad([](SolverConfig& b) { b.newton_max_iter = 0; });
  bad([](SolverConfig& b) { b.paths = 0; });
  bad([](SolverConfig& b) { b.K = -1.0; });

  SolverConfig semi = base(32, 0.1, 1e-3, 1.0);
  semi.scheme = Scheme::SemiImplicit;
  CHECK_THROWS_AS(semi.validate(), StabilityViolation);
  semi.dt = 0.1 / (32.0 * 32.0) / 4.0;
  semi.t_end = semi.dt * 8;
  CHECK_NOTHROW(semi.validate());
}

TEST_CASE("below the plateau one step is the implicit heat step") {
  const SolverConfig c = base(64, 0.1, 1e-2, 1.0);
  const Stepper st(c);
  const Field s = Field::sample(c.grid, [](double x) { return 0.5 * std::sin(pi * x); });
  const double lam = st.laplacian().eigenvalue(1);
  const Field y = step(c, s, 0.0, WienerIncrement{c.dt, zero_dw(c)});
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::fabs(y[i] - s[i] / (1.0 + c.eps * lam * c.dt)) <= 1e-12);
}

TEST_CASE("quadratic potential gives a linear step") {
  std::mt19937_64 rng(11);
  for (double eps : {0.01, 0.5}) {
    const SolverConfig c = base(40, eps, 0.05, 1.0, Potential::quadratic());
    const Field x = random_field(c.grid, rng, 4.0);
    const Field y = step(c, x, 0.0, WienerIncrement{c.dt, zero_dw(c)});
    auto M = oracle::neg_laplacian(x.size(), c.grid.spacing());
    const double a = c.dt * (eps + 1.0 / (1.0 + eps));
    for (std::size_t i = 0; i < M.size(); ++i)
      for (std::size_t j = 0; j < M.size(); ++j) M[i][j] = (i == j ? 1.0 : 0.0) + a * M[i][j];
    const auto ref = oracle::solve(M, x.values);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("nonlinear steps solve the implicit equation") {
  std::mt19937_64 rng(12);
  for (const Potential& psi : {Potential::psi1(), Potential::psi2()})
    for (double eps : {1e-3, 0.05, 1.0}) {
      const SolverConfig c = base(48, eps, 0.02, 1.0, psi);
      const Stepper st(c);
      auto ws = st.make_workspace();
      for (int t = 0; t < 5; ++t) {
        const Field x = random_field(c.grid, rng, 3.0);
        std::vector<double> y = x.values;
        StepDiagnostics d;
        st.step(y, zero_dw(c), ws, &d);
        CHECK(dense_residual(c, x.values, y) <= 1e-9);
        CHECK(d.residuals.back() <= c.newton_tol);
        CHECK(d.iterations + 1 == static_cast<int>(d.residuals.size()));
      }
    }
}

TEST_CASE("Newton diagnostics are monotone") {
  std::mt19937_64 rng(13);
  for (const Potential& psi : {Potential::psi1(), Potential::psi2()}) {
    const SolverConfig c = base(64, 0.005, 0.05, 1.0, psi);
    const Stepper st(c);
    auto ws = st.make_workspace();
    for (int t = 0; t < 20; ++t) {
      std::vector<double> y = random_field(c.grid, rng, 5.0).values;
      StepDiagnostics d;
      st.step(y, zero_dw(c), ws, &d);
      CHECK(d.iterations > 0);
      for (std::size_t k = 1; k < d.residuals.size(); ++k) {
        CHECK(d.residuals[k] < d.residuals[k - 1]);
        CHECK(d.energies[k] <= d.energies[k - 1] + 1e-12 * (1.0 + std::fabs(d.energies[k - 1])));
      }
    }
  }
}

TEST_CASE("zero-noise steps contract in H^-1, L1 and sup") {
  std::mt19937_64 rng(14);
  for (const Potential& psi : {Potential::psi1(), Potential::psi2(), Potential::quadratic()})
    for (double eps : {0.01, 0.1}) {
      const SolverConfig c = base(64, eps, 0.01, 1.0, psi);
      const Stepper st(c);
      auto ws = st.make_workspace();
      const double h = c.grid.spacing();
      for (int t = 0; t < 30; ++t) {
        std::vector<double> a = random_field(c.grid, rng, 3.0).values, b = random_field(c.grid, rng, 3.0).values;
        const double before = hm1_dist(st.laplacian(), a, b);
        double l1_before = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) l1_before += h * std::fabs(a[i] - b[i]);
        const double sup_before = sup_abs(a);
        st.step(a, zero_dw(c), ws);
        st.step(b, zero_dw(c), ws);
        CHECK(hm1_dist(st.laplacian(), a, b) <= before + 2.0 * c.newton_tol);
        double l1_after = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) l1_after += h * std::fabs(a[i] - b[i]);
        CHECK(l1_after <= l1_before + 1e-7);
        CHECK(sup_abs(a) <= sup_before + 1e-7);
      }
    }
}

TEST_CASE("the zero state is fixed under multiplicative noise") {
  SolverConfig c = base(64, 0.1, 0.01, 1.0);
  c.noise.multiplier = Multiplier::LipschitzDiagonal;
  c.noise.gain = 3.0;
  const Stepper st(c);
  auto ws = st.make_workspace();
  std::vector<double> x(c.grid.size(), 0.0), dw(c.noise.modes);
  for (std::uint64_t n = 0; n < 10; ++n) {
    st.noise().draw(0, n, c.dt, dw);
    st.step(x, dw, ws);
    for (double v : x) CHECK(v == 0.0);
  }
}

TEST_CASE("tiny viscosity below the plateau barely moves the state") {
  const SolverConfig c = base(64, 1e-6, 0.01, 1.0);
  const Field x = Field::sample(c.grid, [](double s) { return 0.5 * std::sin(pi * s); });
  const Field y = step(c, x, 0.0, WienerIncrement{c.dt, zero_dw(c)});
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(y[i] - x[i]));
  CHECK(m <= 10.0 * c.eps * c.dt);
  CHECK(m > 0.0);
}

TEST_CASE("ensemble matches the discrete eigen-expansion") {
  SolverConfig c = base(256, 0.1, 1e-3, 0.2);
  c.snapshot_every = 50;
  auto f = [](double s) { return 0.5 * std::sin(pi * s) + 0.3 * std::sin(3 * pi * s); };
  const Field x0 = Field::sample(c.grid, f);
  const PathEnsemble ens = simulate(c, x0);
  REQUIRE_FALSE(ens.any_failed());
  REQUIRE(ens.save_times.size() == 5);
  const DirichletLaplacian L(c.grid);
  const double r1 = 1.0 / (1.0 + c.eps * c.dt * L.eigenvalue(1));
  const double r3 = 1.0 / (1.0 + c.eps * c.dt * L.eigenvalue(3));
  double worst = 0.0;
  for (std::size_t s = 0; s < ens.save_times.size(); ++s) {
    const double n = static_cast<double>(s * 50);
    const auto snap = ens.snapshot(0, s);
    for (std::size_t i = 0; i < snap.size(); ++i) {
      const double xi = c.grid.node(i);
      const double ref = 0.5 * std::pow(r1, n) * std::sin(pi * xi) + 0.3 * std::pow(r3, n) * std::sin(3 * pi * xi);
      worst = std::max(worst, std::fabs(snap[i] - ref));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("path statistics on a single decaying mode") {
  SolverConfig c = base(64, 0.2, 0.01, 0.5);
  const Field s = Field::sample(c.grid, [](double x) { return 0.5 * std::sin(pi * x); });
  const PathEnsemble ens = simulate(c, s);
  const DirichletLaplacian L(c.grid);
  const double r = 1.0 / (1.0 + c.eps * c.dt * L.eigenvalue(1));
  double h10 = 0.0;
  for (std::size_t n = 0; n < c.steps(); ++n) h10 += c.dt * std::pow(r, 2.0 * n) * h10_norm_sq(s.values, c.grid.spacing());
  const PathRecord& p = ens.paths[0];
  CHECK(p.sup_l2_sq == doctest::Approx(l2_norm(s) * l2_norm(s)).epsilon(1e-13));
  CHECK(p.int_h10_sq == doctest::Approx(h10).epsilon(1e-10));
  CHECK(p.int_moreau == 0.0);
  CHECK(p.int_energy == 0.0);
  const EnergyStats e = energy_stats(ens);
  CHECK(e.combined.mean == doctest::Approx(p.sup_l2_sq + c.eps * h10).epsilon(1e-10));
  CHECK(e.combined.se == 0.0);

  const EnergyStats z = energy_stats(simulate(c, Field(c.grid)));
  CHECK(z.combined.mean == 0.0);
  CHECK(z.int_energy.mean == 0.0);
}

TEST_CASE("batch means") {
  std::vector<double> v(20);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
  const Estimate e = batch_mean(v, 4);
  CHECK(e.mean == doctest::Approx(10.5));
  // batch means 3, 8, 13, 18
  CHECK(e.se == doctest::Approx(std::sqrt(125.0 / 3.0 / 4.0)).epsilon(1e-12));
  CHECK(batch_mean(std::vector<double>(7, 2.0)).se == 0.0);
  CHECK(batch_mean(std::vector<double>{}).mean == 0.0);
  CHECK(batch_mean(std::vector<double>{5.0}).se == 0.0);
}

TEST_CASE("ensembles are deterministic and thread-count independent") {
  SolverConfig c = base(32, 0.05, 1.0 / 64, 0.5);
  c.noise.multiplier = Multiplier::LipschitzDiagonal;
  c.noise.gain = 1.0;
  c.noise.seed = 77;
  c.paths = 9;
  const Field x0 = Field::sample(c.grid, [](double s) { return 1.5 * std::sin(pi * s); });
  const PathEnsemble a = simulate(c, x0);
  c.threads = 2;
  const PathEnsemble b = simulate(c, x0);
  c.threads = 1;
  const PathEnsemble again = simulate(c, x0);
  for (std::size_t p = 0; p < c.paths; ++p) {
    CHECK(a.paths[p].snapshots == b.paths[p].snapshots);
    CHECK(a.paths[p].snapshots == again.paths[p].snapshots);
    CHECK(a.paths[p].int_h10_sq == b.paths[p].int_h10_sq);
  }
  CHECK(a.paths[0].snapshots != a.paths[1].snapshots);
  c.noise.seed = 78;
  CHECK(simulate(c, x0).paths[0].snapshots != a.paths[0].snapshots);
}

TEST_CASE("coupled runs") {
  SolverConfig c = base(32, 0.05, 1.0 / 64, 0.5);
  c.noise.multiplier = Multiplier::LipschitzDiagonal;
  c.noise.gain = 1.0;
  c.paths = 4;
  c.K = 3.0;
  const Field x0 = Field::sample(c.grid, [](double s) { return 1.5 * std::sin(pi * s); });
  const Field y0 = Field::sample(c.grid, [](double s) { return 0.5 * std::sin(2 * pi * s); });

  const PairedEnsemble same = coupled_simulate(c, c, x0, x0);
  for (std::size_t p = 0; p < c.paths; ++p) {
    CHECK(same.sup_weighted[p] == 0.0);
    for (double v : same.diff_sq[p]) CHECK(v == 0.0);
  }

  const PairedEnsemble pe = coupled_simulate(c, c, x0, y0);
  const PathEnsemble solo = simulate(c, x0);
  const DirichletLaplacian L(c.grid);
  for (std::size_t p = 0; p < c.paths; ++p) {
    CHECK(pe.a.paths[p].snapshots == solo.paths[p].snapshots);
    REQUIRE(pe.diff_sq[p].size() == c.steps() + 1);
    double sup = 0.0;
    for (std::size_t n = 0; n < pe.diff_sq[p].size(); ++n)
      sup = std::max(sup, std::exp(-c.K * n * c.dt) * pe.diff_sq[p][n]);
    CHECK(pe.sup_weighted[p] == sup);
    const double d_end = hm1_dist(L, pe.a.snapshot(p, pe.a.save_times.size() - 1),
                                  pe.b.snapshot(p, pe.b.save_times.size() - 1));
    CHECK(pe.diff_sq[p].back() == doctest::Approx(d_end * d_end).epsilon(1e-10));
  }

  SolverConfig other = c;
  other.noise.seed = 2;
  CHECK_THROWS_AS(coupled_simulate(c, other, x0, y0), ConfigMismatch);
  other = c;
  other.dt = 1.0 / 128;
  CHECK_THROWS_AS(coupled_simulate(c, other, x0, y0), ConfigMismatch);
  other = c;
  other.grid = Grid(0.0, 1.0, 64);
  CHECK_THROWS_AS(coupled_simulate(c, other, x0, y0), ConfigMismatch);
  other = c;
  other.eps = 0.2;
  CHECK_NOTHROW(coupled_simulate(c, other, x0, y0));
}

TEST_CASE("Newton failures are reported") {
  SolverConfig c = base(64, 1e-3, 0.1, 0.2, Potential::psi2());
  c.newton_max_iter = 1;
  c.newton_tol = 1e-14;
  std::mt19937_64 rng(15);
  const Field x = random_field(c.grid, rng, 5.0);
  try {
    (void)step(c, x, 0.0, WienerIncrement{c.dt, zero_dw(c)});
    FAIL("expected NewtonDivergence");
  } catch (const NewtonDivergence& e) {
    CHECK(e.residual_history().size() >= 1);
  }
  const PathEnsemble ens = simulate(c, x);
  CHECK(ens.any_failed());
  CHECK(ens.paths[0].failed_step == 0);
  CHECK(ens.paths[0].error.rfind("NewtonDivergence", 0) == 0);
  const EnergyStats e = energy_stats(ens);
  CHECK(e.combined.mean == 0.0);
}

TEST_CASE("step argument checks") {
  const SolverConfig c = base(32, 0.1, 0.1, 1.0);
  CHECK_THROWS_AS(step(c, Field(Grid(0, 1, 16)), 0.0, WienerIncrement{c.dt, zero_dw(c)}), GridMismatch);
  CHECK_THROWS_AS(step(c, Field(c.grid), 0.0, WienerIncrement{c.dt, {1.0}}), ParamError);
  CHECK_THROWS_AS(simulate(c, Field(Grid(0, 1, 16))), GridMismatch);
}

TEST_CASE("semi-implicit scheme tracks the implicit one on small steps") {
  SolverConfig c = base(32, 0.5, 1.0 / 8192.0, 400.0 / 8192.0, Potential::quadratic());
  c.scheme = Scheme::SemiImplicit;
  c.snapshot_every = 1000000;
  const Field x0 = Field::sample(c.grid, [](double s) { return std::sin(pi * s); });
  const PathEnsemble semi = simulate(c, x0);
  c.scheme = Scheme::ImplicitMonotone;
  const PathEnsemble impl = simulate(c, x0);
  const auto a = semi.snapshot(0, 1), b = impl.snapshot(0, 1);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  CHECK(m <= 1e-3);
  CHECK(sup_abs(a) < 1.0);
}
