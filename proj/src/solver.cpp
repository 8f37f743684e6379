#include "svilab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "svilab/error.hpp"
#include "svilab/simd/kernels.hpp"

namespace svilab {

namespace {
constexpr int kMaxHalvings = 40;
}

const char* to_string(Scheme s) noexcept {
  return s == Scheme::ImplicitMonotone ? "IMPLICIT_MONOTONE" : "SEMI_IMPLICIT";
}

void SolverConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ParamError("solver: eps must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParamError("solver: dt must be positive");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ParamError("solver: t_end must be positive");
  if (dt > t_end * (1.0 + 1e-12)) throw ParamError("solver: dt exceeds t_end");
  const double ratio = t_end / dt;
  if (std::fabs(ratio - std::round(ratio)) > 1e-9 * ratio)
    throw ParamError("solver: t_end must be an integer multiple of dt");
  if (!(newton_tol > 0.0)) throw ParamError("solver: newton_tol must be positive");
  if (newton_max_iter < 1) throw ParamError("solver: newton_max_iter must be >= 1");
  if (paths < 1) throw ParamError("solver: need at least one path");
  if (!(K >= 0.0) || !std::isfinite(K)) throw ParamError("solver: K must be finite and >= 0");
  if (scheme == Scheme::SemiImplicit) {
    const double h = grid.spacing();
    const double bound = eps * h * h / 4.0;
    if (dt > bound)
      throw StabilityViolation("solver: SEMI_IMPLICIT needs dt <= eps*h^2/4 = " +
                               std::to_string(bound) + ", got dt = " + std::to_string(dt));
  }
}

std::size_t SolverConfig::steps() const {
  return static_cast<std::size_t>(std::llround(t_end / dt));
}

std::size_t SolverConfig::cadence() const {
  if (snapshot_every > 0) return snapshot_every;
  return std::max<std::size_t>(1, steps() / 256);
}

// ---------------------------------------------------------------------------
// Stepper

Stepper::Stepper(const SolverConfig& cfg)
    : cfg_(cfg), L_(cfg.grid), rp_(cfg.potential, cfg.eps), noise_(cfg.grid, cfg.noise) {
  cfg_.validate();
  if (const auto& yt = rp_.yosida_table()) {
    simd::PwlTable g = *yt;
    for (double& a : g.slope) a += cfg_.eps;
    simd::PwlTable b = g;
    for (std::size_t k = 0; k < g.size(); ++k) {
      b.start[k] = g.slope[k] * g.start[k] + g.intercept[k];
      b.slope[k] = 1.0 / g.slope[k];
      b.intercept[k] = -g.intercept[k] / g.slope[k];
    }
    g_table_ = std::move(g);
    beta_table_ = std::move(b);
  }
}

Stepper::Workspace Stepper::make_workspace() const {
  const std::size_t n = cfg_.grid.size();
  Workspace ws;
  for (auto* v : {&ws.r, &ws.w, &ws.w0, &ws.y, &ws.dy, &ws.res, &ws.tmp, &ws.delta, &ws.ldelta, &ws.trial,
                  &ws.ty, &ws.tdy, &ws.sub, &ws.diag, &ws.sup, &ws.work, &ws.noise})
    v->assign(n, 0.0);
  ws.dw.assign(noise_.modes(), 0.0);
  return ws;
}

void Stepper::pressure(std::span<const double> y, std::span<double> w) const {
  if (g_table_) {
    std::vector<double> d(y.size());
    simd::odd_pwl(*g_table_, y, w, d);
    return;
  }
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = cfg_.eps * y[i] + yosida_phi_eps(rp_, y[i]);
}

void Stepper::inverse_pressure(std::span<const double> w, std::span<double> y,
                               std::span<double> dy) const {
  if (beta_table_) {
    simd::odd_pwl(*beta_table_, w, y, dy);
    return;
  }
  // g is odd with slope ≥ ε, so |β(w)| ≤ |w|/ε
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double aw = std::fabs(w[i]);
    double lo = 0.0, hi = aw / cfg_.eps;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (cfg_.eps * mid + yosida_phi_eps(rp_, mid) < aw ? lo : hi) = mid;
    }
    const double v = 0.5 * (lo + hi);
    y[i] = std::copysign(v, w[i]);
    dy[i] = 1.0 / (cfg_.eps + yosida_derivative(rp_, v));
  }
}

void Stepper::drift(std::span<const double> y, std::span<double> out) const {
  std::vector<double> w(y.size());
  pressure(y, w);
  L_.apply(w, out);
}

double Stepper::residual(Workspace& ws) const {
  const std::size_t n = ws.w.size();
  inverse_pressure(ws.w, ws.y, ws.dy);
  L_.apply(ws.w, ws.tmp);
  for (std::size_t i = 0; i < n; ++i) ws.res[i] = ws.y[i] - ws.r[i] - cfg_.dt * ws.tmp[i];
  L_.solve_negative(ws.res, ws.tmp);
  return std::sqrt(std::max(0.0, cfg_.grid.spacing() * simd::dot(ws.res, ws.tmp)));
}

double Stepper::line_search(Workspace& ws) const {
  const std::size_t n = ws.w.size();
  const double dt = cfg_.dt;
  // dE(w + αδ)/dα / h = Σ δᵢ (β(tᵢ) − rᵢ) − dt Σ tᵢ (Lδ)ᵢ, t = w + αδ;
  // nondecreasing in α by convexity.
  L_.apply(ws.delta, ws.ldelta);
  auto slope = [&](double alpha) {
    for (std::size_t i = 0; i < n; ++i) ws.trial[i] = ws.w[i] + alpha * ws.delta[i];
    inverse_pressure(ws.trial, ws.ty, ws.tdy);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += ws.delta[i] * (ws.ty[i] - ws.r[i]) - dt * ws.trial[i] * ws.ldelta[i];
    return s;
  };
  double flo = slope(0.0);
  if (!(flo < 0.0)) return 0.0;
  double fhi = slope(1.0);
  if (fhi <= 0.0) return 1.0;
  // Illinois regula falsi
  double lo = 0.0, hi = 1.0;
  int side = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double a = (lo * fhi - hi * flo) / (fhi - flo);
    const double fa = slope(a);
    if (fa == 0.0) return a;
    if (fa < 0.0) {
      lo = a;
      flo = fa;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = a;
      fhi = fa;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

double Stepper::step_energy(Workspace& ws) const {
  // B(w) = w β(w) − Φ(β(w)) with Φ(y) = εy²/2 + ψ^ε(y)
  const std::size_t n = ws.w.size();
  inverse_pressure(ws.w, ws.ty, ws.tdy);
  L_.apply(ws.w, ws.tmp);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = ws.ty[i];
    const double phi = 0.5 * cfg_.eps * y * y + moreau_psi_eps(rp_, y);
    s += ws.w[i] * y - phi - 0.5 * cfg_.dt * ws.w[i] * ws.tmp[i] - ws.r[i] * ws.w[i];
  }
  return cfg_.grid.spacing() * s;
}

void Stepper::step(std::vector<double>& x, std::span<const double> dw, Workspace& ws,
                   StepDiagnostics* diag) const {
  const std::size_t n = x.size();
  noise_.apply(x, dw, ws.noise);
  for (std::size_t i = 0; i < n; ++i) ws.r[i] = x[i] + ws.noise[i];

  const double h = cfg_.grid.spacing();
  const double c = cfg_.dt / (h * h);

  if (cfg_.scheme == Scheme::SemiImplicit) {
    rp_.apply_yosida(x, ws.y, ws.dy);
    L_.apply(ws.y, ws.tmp);
    for (std::size_t i = 0; i < n; ++i) {
      ws.w[i] = ws.r[i] + cfg_.dt * ws.tmp[i];
      ws.sub[i] = -c * cfg_.eps;
      ws.sup[i] = -c * cfg_.eps;
      ws.diag[i] = 1.0 + 2.0 * c * cfg_.eps;
    }
    solve_tridiagonal(ws.sub, ws.diag, ws.sup, ws.w, ws.work);
    std::copy(ws.w.begin(), ws.w.end(), x.begin());
    if (diag) *diag = StepDiagnostics{};
    return;
  }

  pressure(x, ws.w);
  double res = residual(ws);
  std::vector<double> history{res};
  if (diag) diag->energies.assign(1, step_energy(ws));
  int it = 0;
  while (res > cfg_.newton_tol) {
    if (it >= cfg_.newton_max_iter)
      throw NewtonDivergence("newton: no convergence in " + std::to_string(it) + " iterations",
                             history);
    // J = diag(β'(w)) − dt L
    for (std::size_t i = 0; i < n; ++i) {
      ws.diag[i] = ws.dy[i] + 2.0 * c;
      ws.sub[i] = -c;
      ws.sup[i] = -c;
      ws.delta[i] = -ws.res[i];
    }
    solve_tridiagonal(ws.sub, ws.diag, ws.sup, ws.delta, ws.work);
    const double alpha = line_search(ws);
    if (alpha == 0.0)
      throw NewtonDivergence("newton: no descent at residual " + std::to_string(res), history);
    // Any step in (0, alpha] lowers E; the Newton direction also descends
    // every norm of the residual, so halving finds a residual decrease too.
    std::copy(ws.w.begin(), ws.w.end(), ws.w0.begin());
    double a = alpha, next = res;
    for (int bt = 0; bt <= kMaxHalvings; ++bt, a *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) ws.w[i] = ws.w0[i] + a * ws.delta[i];
      next = residual(ws);
      if (next < res) break;
    }
    res = next;
    history.push_back(res);
    if (diag) diag->energies.push_back(step_energy(ws));
    ++it;
  }
  std::copy(ws.y.begin(), ws.y.end(), x.begin());
  if (diag) {
    diag->iterations = it;
    diag->residuals = std::move(history);
  }
}

double Stepper::moreau_energy(std::span<const double> u) const {
  double s = 0.0;
  for (double v : u) s += moreau_psi_eps(rp_, v);
  return cfg_.grid.spacing() * s;
}

double Stepper::energy(std::span<const double> u) const {
  double s = 0.0;
  for (double v : u) s += cfg_.potential.value(v);
  return cfg_.grid.spacing() * s;
}

Field step(const SolverConfig& cfg, const Field& x, double, const WienerIncrement& dw,
           StepDiagnostics* diag) {
  require_same_grid(cfg.grid, x.grid, "step");
  const Stepper st(cfg);
  if (dw.gaussians.size() != st.noise().modes())
    throw ParamError("step: increment has wrong length");
  auto ws = st.make_workspace();
  std::vector<double> v = x.values;
  st.step(v, dw.gaussians, ws, diag);
  return Field(cfg.grid, std::move(v));
}

// ---------------------------------------------------------------------------
// Ensembles

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = n * t / threads;
    const std::size_t hi = n * (t + 1) / threads;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

std::span<const double> PathEnsemble::snapshot(std::size_t path, std::size_t save) const {
  const std::size_t n = nodes();
  return std::span<const double>(paths[path].snapshots).subspan(save * n, n);
}

bool PathEnsemble::any_failed() const noexcept {
  return std::any_of(paths.begin(), paths.end(), [](const PathRecord& p) { return p.failed; });
}

std::vector<double> save_schedule(const SolverConfig& cfg) {
  std::vector<double> t{0.0};
  const std::size_t steps = cfg.steps();
  const std::size_t cad = cfg.cadence();
  for (std::size_t n = 1; n <= steps; ++n)
    if (n % cad == 0 || n == steps) t.push_back(static_cast<double>(n) * cfg.dt);
  return t;
}

namespace {

// Running statistics of one path; left-endpoint integrals, sup over all steps.
struct PathTracker {
  const Stepper& st;
  PathRecord rec;
  std::vector<double> x;

  PathTracker(const Stepper& s, const Field& x0, std::size_t saves) : st(s), x(x0.values) {
    if (st.config().keep_snapshots) rec.snapshots.reserve(saves * x.size());
    save();
    rec.sup_l2_sq = l2_sq();
  }

  double l2_sq() const { return st.config().grid.spacing() * simd::dot(x, x); }

  void save() {
    if (st.config().keep_snapshots) rec.snapshots.insert(rec.snapshots.end(), x.begin(), x.end());
  }

  void before(std::size_t) {
    const double dt = st.config().dt;
    rec.int_h10_sq += dt * h10_norm_sq(x, st.config().grid.spacing());
    rec.int_moreau += dt * st.moreau_energy(x);
    rec.int_energy += dt * st.energy(x);
  }

  void after(std::size_t n) {
    rec.sup_l2_sq = std::max(rec.sup_l2_sq, l2_sq());
    const std::size_t done = n + 1;
    if (done % st.config().cadence() == 0 || done == st.config().steps()) save();
  }

  void fail(std::size_t n, const Error& e) {
    rec.failed = true;
    rec.failed_step = n;
    rec.error = std::string(e.name()) + ": " + e.what();
  }
};

}  // namespace

PathEnsemble simulate(const SolverConfig& cfg, const Field& x0) {
  require_same_grid(cfg.grid, x0.grid, "simulate");
  const Stepper st(cfg);
  PathEnsemble ens;
  ens.config = cfg;
  ens.save_times = save_schedule(cfg);
  ens.paths.resize(cfg.paths);
  const std::size_t steps = cfg.steps();
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t p) {
    auto ws = st.make_workspace();
    PathTracker tr(st, x0, ens.save_times.size());
    for (std::size_t n = 0; n < steps; ++n) {
      tr.before(n);
      st.noise().draw(p, n, cfg.dt, ws.dw);
      try {
        st.step(tr.x, ws.dw, ws);
      } catch (const Error& e) {
        tr.fail(n, e);
        break;
      }
      tr.after(n);
    }
    ens.paths[p] = std::move(tr.rec);
  });
  return ens;
}

namespace {

void require_coupling(const SolverConfig& a, const SolverConfig& b) {
  auto mismatch = [](const char* what) {
    throw ConfigMismatch(std::string("coupled_simulate: ") + what + " differ");
  };
  if (!(a.grid == b.grid)) mismatch("grids");
  if (a.dt != b.dt) mismatch("time steps");
  if (a.t_end != b.t_end) mismatch("horizons");
  if (a.paths != b.paths) mismatch("path counts");
  const NoiseConfig& na = a.noise;
  const NoiseConfig& nb = b.noise;
  if (na.seed != nb.seed) mismatch("seeds");
  if (na.modes != nb.modes || na.weights != nb.weights || na.multiplier != nb.multiplier ||
      na.gain != nb.gain || na.sigma_cap != nb.sigma_cap)
    mismatch("noise models");
}

}  // namespace

PairedEnsemble coupled_simulate(const SolverConfig& cfg_a, const SolverConfig& cfg_b,
                                const Field& x0_a, const Field& x0_b) {
  require_coupling(cfg_a, cfg_b);
  require_same_grid(cfg_a.grid, x0_a.grid, "coupled_simulate");
  require_same_grid(cfg_b.grid, x0_b.grid, "coupled_simulate");
  const Stepper sa(cfg_a);
  const Stepper sb(cfg_b);
  PairedEnsemble out;
  out.dt = cfg_a.dt;
  out.a.config = cfg_a;
  out.b.config = cfg_b;
  out.a.save_times = save_schedule(cfg_a);
  out.b.save_times = save_schedule(cfg_b);
  out.a.paths.resize(cfg_a.paths);
  out.b.paths.resize(cfg_a.paths);
  out.diff_sq.resize(cfg_a.paths);
  out.sup_weighted.assign(cfg_a.paths, 0.0);
  const std::size_t steps = cfg_a.steps();
  const double h = cfg_a.grid.spacing();
  const double K = cfg_a.K;
  parallel_for(cfg_a.paths, cfg_a.threads, [&](std::size_t p) {
    auto wa = sa.make_workspace();
    auto wb = sb.make_workspace();
    PathTracker ta(sa, x0_a, out.a.save_times.size());
    PathTracker tb(sb, x0_b, out.b.save_times.size());
    std::vector<double> d(ta.x.size()), w(ta.x.size());
    auto& hist = out.diff_sq[p];
    hist.reserve(steps + 1);
    auto record = [&](std::size_t n) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = ta.x[i] - tb.x[i];
      sa.laplacian().solve_negative(d, w);
      const double v = h * simd::dot(d, w);
      hist.push_back(v);
      const double t = static_cast<double>(n) * cfg_a.dt;
      out.sup_weighted[p] = std::max(out.sup_weighted[p], std::exp(-K * t) * v);
    };
    record(0);
    for (std::size_t n = 0; n < steps; ++n) {
      ta.before(n);
      tb.before(n);
      sa.noise().draw(p, n, cfg_a.dt, wa.dw);
      try {
        sa.step(ta.x, wa.dw, wa);
      } catch (const Error& e) {
        ta.fail(n, e);
        break;
      }
      try {
        sb.step(tb.x, wa.dw, wb);
      } catch (const Error& e) {
        tb.fail(n, e);
        break;
      }
      ta.after(n);
      tb.after(n);
      record(n + 1);
    }
    out.a.paths[p] = std::move(ta.rec);
    out.b.paths[p] = std::move(tb.rec);
  });
  return out;
}

Estimate batch_mean(std::span<const double> v, std::size_t batches) {
  Estimate e;
  const std::size_t n = v.size();
  if (n == 0) return e;
  double s = 0.0;
  for (double x : v) s += x;
  e.mean = s / static_cast<double>(n);
  const std::size_t B = std::min(batches, n);
  if (B < 2) return e;
  std::vector<double> means(B);
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t lo = n * b / B;
    const std::size_t hi = n * (b + 1) / B;
    double t = 0.0;
    for (std::size_t i = lo; i < hi; ++i) t += v[i];
    means[b] = t / static_cast<double>(hi - lo);
  }
  double mb = 0.0;
  for (double m : means) mb += m;
  mb /= static_cast<double>(B);
  double var = 0.0;
  for (double m : means) var += (m - mb) * (m - mb);
  var /= static_cast<double>(B - 1);
  e.se = std::sqrt(var / static_cast<double>(B));
  return e;
}

EnergyStats energy_stats(const PathEnsemble& ens) {
  std::vector<double> sup, h10, mor, en, comb;
  for (const PathRecord& p : ens.paths) {
    if (p.failed) continue;
    sup.push_back(p.sup_l2_sq);
    h10.push_back(ens.config.eps * p.int_h10_sq);
    mor.push_back(p.int_moreau);
    en.push_back(p.int_energy);
    comb.push_back(p.sup_l2_sq + ens.config.eps * p.int_h10_sq);
  }
  return {batch_mean(sup), batch_mean(h10), batch_mean(mor), batch_mean(en), batch_mean(comb)};
}

}  // namespace svilab
