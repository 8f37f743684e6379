#include "svilab/svi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "svilab/error.hpp"
#include "svilab/simd/kernels.hpp"

namespace svilab {

const char* to_string(DriftKind k) noexcept {
  switch (k) {
    case DriftKind::Zero: return "ZERO";
    case DriftKind::ConstantG: return "CONSTANT_G";
    case DriftKind::RegularizedSolution: return "REGULARIZED_SOLUTION";
  }
  return "?";
}

std::span<const double> TestProcess::drift(std::size_t path, std::size_t interval) const {
  if (kind == DriftKind::ConstantG) return constant_g->values;
  if (!g.empty()) {
    const std::size_t n = z.nodes();
    return std::span<const double>(g[path]).subspan(interval * n, n);
  }
  static thread_local std::vector<double> zeros;
  zeros.assign(z.nodes(), 0.0);
  return zeros;
}

namespace {

double hminus1_sq(const DirichletLaplacian& L, std::span<const double> d, std::vector<double>& w,
                  double h) {
  L.solve_negative(d, w);
  return h * simd::dot(d, w);
}

bool every_step(const PathEnsemble& e) { return e.save_times.size() == e.config.steps() + 1; }

}  // namespace

TestProcess build_test_process(DriftKind kind, const SolverConfig& cfg, const Field& z0,
                               std::optional<Field> G, std::optional<double> inner_eps) {
  require_same_grid(cfg.grid, z0.grid, "build_test_process");
  TestProcess tp;
  tp.kind = kind;
  SolverConfig zc = cfg;
  zc.keep_snapshots = true;
  if (kind == DriftKind::ConstantG) {
    if (!G) throw ParamError("build_test_process: CONSTANT_G needs a drift field");
    require_same_grid(cfg.grid, G->grid, "build_test_process");
    tp.constant_g = std::move(G);
  }
  if (kind == DriftKind::RegularizedSolution) {
    if (!inner_eps || !(*inner_eps > 0.0))
      throw ParamError("build_test_process: REGULARIZED_SOLUTION needs a positive inner eps");
    zc.eps = *inner_eps;
    zc.scheme = Scheme::ImplicitMonotone;
  }
  zc.validate();

  const Stepper st(zc);
  const std::size_t n = zc.grid.size();
  const std::size_t steps = zc.steps();
  const std::size_t cad = zc.cadence();
  const double dt = zc.dt;
  const double h = zc.grid.spacing();
  tp.z.config = zc;
  tp.z.save_times = save_schedule(zc);
  const std::size_t intervals = tp.z.save_times.size() - 1;
  tp.z.paths.resize(zc.paths);
  const bool implicit = kind == DriftKind::RegularizedSolution;
  if (implicit) tp.g.resize(zc.paths);

  parallel_for(zc.paths, zc.threads, [&](std::size_t p) {
    auto ws = st.make_workspace();
    PathRecord& rec = tp.z.paths[p];
    std::vector<double> z = z0.values, b(n), drift(n);
    std::vector<double>* g = implicit ? &tp.g[p] : nullptr;
    if (g) g->assign(intervals * n, 0.0);
    std::vector<std::size_t> count(intervals, 0);
    rec.snapshots.reserve((intervals + 1) * n);
    rec.snapshots.insert(rec.snapshots.end(), z.begin(), z.end());
    rec.sup_l2_sq = h * simd::dot(z, z);
    for (std::size_t s = 0; s < steps; ++s) {
      rec.int_h10_sq += dt * h10_norm_sq(z, h);
      rec.int_energy += dt * st.energy(z);
      rec.int_moreau += dt * st.moreau_energy(z);
      st.noise().draw(p, s, dt, ws.dw);
      const std::size_t k = std::min(s / cad, intervals - 1);
      if (implicit) {
        try {
          st.step(z, ws.dw, ws);
        } catch (const Error& e) {
          rec.failed = true;
          rec.failed_step = s;
          rec.error = std::string(e.name()) + ": " + e.what();
          break;
        }
        st.drift(z, drift);
        simd::axpy(1.0, drift, std::span<double>(*g).subspan(k * n, n));
        ++count[k];
      } else {
        st.noise().apply(z, ws.dw, b);
        if (tp.constant_g) simd::axpy(dt, tp.constant_g->values, b);
        for (std::size_t i = 0; i < n; ++i) z[i] += b[i];
      }
      rec.sup_l2_sq = std::max(rec.sup_l2_sq, h * simd::dot(z, z));
      const std::size_t done = s + 1;
      if (done % cad == 0 || done == steps) rec.snapshots.insert(rec.snapshots.end(), z.begin(), z.end());
    }
    if (g)
      for (std::size_t k = 0; k < intervals; ++k)
        if (count[k] > 1)
          for (std::size_t i = 0; i < n; ++i) (*g)[k * n + i] /= static_cast<double>(count[k]);
  });
  return tp;
}

TestProcess test_process_from_ensemble(const PathEnsemble& ens) {
  if (!every_step(ens))
    throw AlignmentError("test_process_from_ensemble: snapshots must be saved every step");
  if (ens.paths.empty() || ens.paths.front().snapshots.empty())
    throw AlignmentError("test_process_from_ensemble: ensemble has no snapshots");
  const Stepper st(ens.config);
  TestProcess tp;
  tp.kind = DriftKind::RegularizedSolution;
  tp.z = ens;
  const std::size_t n = ens.nodes();
  const std::size_t intervals = ens.save_times.size() - 1;
  tp.g.resize(ens.paths.size());
  for (std::size_t p = 0; p < ens.paths.size(); ++p) {
    if (ens.paths[p].failed) continue;
    tp.g[p].assign(intervals * n, 0.0);
    for (std::size_t k = 0; k < intervals; ++k)
      st.drift(ens.snapshot(p, k + 1), std::span<double>(tp.g[p]).subspan(k * n, n));
  }
  return tp;
}

double identity_residual(const TestProcess& tp) {
  const PathEnsemble& z = tp.z;
  if (!every_step(z)) throw AlignmentError("identity_residual: snapshots must be saved every step");
  const SolverConfig& c = z.config;
  const NoiseModel nm(c.grid, c.noise);
  const DirichletLaplacian L(c.grid);
  const std::size_t n = z.nodes();
  const double h = c.grid.spacing();
  std::vector<double> dw(nm.modes()), b(n), r(n), w(n);
  double worst = 0.0;
  for (std::size_t p = 0; p < z.paths.size(); ++p) {
    if (z.paths[p].failed) continue;
    for (std::size_t k = 0; k + 1 < z.save_times.size(); ++k) {
      const auto z0 = z.snapshot(p, k);
      const auto z1 = z.snapshot(p, k + 1);
      const double dt = z.save_times[k + 1] - z.save_times[k];
      nm.draw(p, k, c.dt, dw);
      nm.apply(z0, dw, b);
      const auto g = tp.drift(p, k);
      for (std::size_t i = 0; i < n; ++i) r[i] = z1[i] - z0[i] - dt * g[i] - b[i];
      worst = std::max(worst, std::sqrt(std::max(0.0, hminus1_sq(L, r, w, h))));
    }
  }
  return worst;
}

bool SviReport::holds(double k) const {
  for (std::size_t i = 0; i < margin.size(); ++i)
    if (margin[i].mean < -k * margin[i].se - 1e-10 * (1.0 + std::fabs(lhs[i].mean))) return false;
  return true;
}

double SviReport::worst_z() const {
  double z = std::numeric_limits<double>::infinity();
  for (const Estimate& m : margin) {
    if (m.se > 0.0)
      z = std::min(z, m.mean / m.se);
    else if (m.mean < 0.0)
      z = -std::numeric_limits<double>::infinity();
    else
      z = std::min(z, 0.0);
  }
  return margin.empty() ? 0.0 : z;
}

SviReport svi_margin(const PathEnsemble& x, const TestProcess& tp, const EnergyFunctional& f,
                     double C, Quadrature q) {
  const PathEnsemble& z = tp.z;
  if (!(x.config.grid == z.config.grid)) throw AlignmentError("svi_margin: grids differ");
  if (x.save_times != z.save_times) throw AlignmentError("svi_margin: save times differ");
  if (x.paths.size() != z.paths.size()) throw AlignmentError("svi_margin: path counts differ");
  if (x.config.noise.seed != z.config.noise.seed)
    throw AlignmentError("svi_margin: noise seeds differ");
  if (!(C >= 0.0)) throw ParamError("svi_margin: C must be >= 0");

  const Grid& grid = x.config.grid;
  const DirichletLaplacian L(grid);
  const double h = grid.spacing();
  const std::size_t n = grid.size();
  const std::size_t S = x.save_times.size();

  std::vector<std::size_t> used;
  for (std::size_t p = 0; p < x.paths.size(); ++p)
    if (!x.paths[p].failed && !z.paths[p].failed && !x.paths[p].snapshots.empty() &&
        !z.paths[p].snapshots.empty())
      used.push_back(p);
  const std::size_t P = used.size();

  // term × save × path
  enum { Dist, IX, Dist0, IZ, IG, ID, Terms };
  std::vector<std::vector<double>> terms(Terms, std::vector<double>(S * P, 0.0));
  std::vector<double> e(n), w(n), fx(S), fz(S), d(S), pair(S);
  for (std::size_t j = 0; j < P; ++j) {
    const std::size_t p = used[j];
    for (std::size_t k = 0; k < S; ++k) {
      const auto xs = x.snapshot(p, k);
      const auto zs = z.snapshot(p, k);
      for (std::size_t i = 0; i < n; ++i) e[i] = xs[i] - zs[i];
      d[k] = hminus1_sq(L, e, w, h);
      fx[k] = energy(f.potential, xs, h);
      fz[k] = energy(f.potential, zs, h);
      // ⟨G_{k'}, X_k − Z_k⟩ for the interval whose integrand sits at node k
      const bool right = q == Quadrature::Implicit;
      if (right ? k > 0 : k + 1 < S) {
        const auto g = tp.drift(p, right ? k - 1 : k);
        pair[k] = h * simd::dot(g, w);
      } else {
        pair[k] = 0.0;
      }
    }
    double ix = 0.0, iz = 0.0, ig = 0.0, id = 0.0;
    for (std::size_t k = 0; k < S; ++k) {
      if (k > 0) {
        const double dt = x.save_times[k] - x.save_times[k - 1];
        const std::size_t node = q == Quadrature::Implicit ? k : k - 1;
        ix += dt * fx[node];
        iz += dt * fz[node];
        ig += dt * pair[node];
        id += dt * d[k - 1];
      }
      const std::size_t at = k * P + j;
      terms[Dist][at] = d[k];
      terms[IX][at] = 2.0 * ix;
      terms[Dist0][at] = d[0];
      terms[IZ][at] = 2.0 * iz;
      terms[IG][at] = -2.0 * ig;
      terms[ID][at] = C * id;
    }
  }

  SviReport r;
  r.t = x.save_times;
  r.constant_used = C;
  r.paths_used = P;
  std::vector<double> lhs(P), rhs(P), mar(P);
  auto mean_of = [&](int term, std::size_t k) {
    if (P == 0) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < P; ++j) s += terms[term][k * P + j];
    return s / static_cast<double>(P);
  };
  for (std::size_t k = 0; k < S; ++k) {
    for (std::size_t j = 0; j < P; ++j) {
      const std::size_t at = k * P + j;
      lhs[j] = terms[Dist][at] + terms[IX][at];
      rhs[j] = terms[Dist0][at] + terms[IZ][at] + terms[IG][at] + terms[ID][at];
      mar[j] = rhs[j] - lhs[j];
    }
    r.lhs.push_back(batch_mean(lhs));
    r.rhs.push_back(batch_mean(rhs));
    r.margin.push_back(batch_mean(mar));
    r.dist.push_back(mean_of(Dist, k));
    r.int_phi_x.push_back(mean_of(IX, k));
    r.dist0.push_back(mean_of(Dist0, k));
    r.int_phi_z.push_back(mean_of(IZ, k));
    r.int_pairing.push_back(mean_of(IG, k));
    r.int_dist.push_back(mean_of(ID, k));
  }
  return r;
}

NoiseRate noise_rate(const NoiseModel& nm, const PathEnsemble& a, const PathEnsemble& b) {
  if (!(a.config.grid == b.config.grid) || !(nm.grid() == a.config.grid))
    throw AlignmentError("noise_rate: grids differ");
  if (a.save_times != b.save_times || a.paths.size() != b.paths.size())
    throw AlignmentError("noise_rate: ensembles are not aligned");
  const DirichletLaplacian L(nm.grid());
  const double h = nm.grid().spacing();
  const std::size_t n = nm.grid().size();
  std::vector<double> e(n), w(n);
  NoiseRate r;
  for (std::size_t k = 0; k < a.save_times.size(); ++k) {
    double sum_b = 0.0, sum_d = 0.0;
    for (std::size_t p = 0; p < a.paths.size(); ++p) {
      if (a.paths[p].failed || b.paths[p].failed) continue;
      const auto u = a.snapshot(p, k);
      const auto v = b.snapshot(p, k);
      for (std::size_t i = 0; i < n; ++i) e[i] = u[i] - v[i];
      const double dsq = hminus1_sq(L, e, w, h);
      const double bsq = hs_diff_sq(nm, L, u, v, false);
      sum_b += bsq;
      sum_d += dsq;
      if (dsq > 1e-24) r.pathwise = std::max(r.pathwise, bsq / dsq);
    }
    if (sum_d > 1e-24) r.in_mean = std::max(r.in_mean, sum_b / sum_d);
  }
  return r;
}

ContractionReport contraction_stat(const PairedEnsemble& pair) {
  ContractionReport r;
  std::size_t len = 0;
  for (std::size_t p = 0; p < pair.diff_sq.size(); ++p)
    if (!pair.a.paths[p].failed && !pair.b.paths[p].failed)
      len = std::max(len, pair.diff_sq[p].size());
  r.mean_sq.assign(len, 0.0);
  std::size_t used = 0;
  for (std::size_t p = 0; p < pair.diff_sq.size(); ++p) {
    if (pair.a.paths[p].failed || pair.b.paths[p].failed || pair.diff_sq[p].size() != len) continue;
    for (std::size_t k = 0; k < len; ++k) r.mean_sq[k] += pair.diff_sq[p][k];
    ++used;
  }
  if (used == 0 || len == 0) return r;
  for (double& m : r.mean_sq) m /= static_cast<double>(used);
  r.initial = r.mean_sq.front();
  r.sup = *std::max_element(r.mean_sq.begin(), r.mean_sq.end());
  r.ratio = r.initial > 0.0 ? r.sup / r.initial : (r.sup > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return r;
}

RateFit gronwall_rate(const PairedEnsemble& pair) {
  const ContractionReport c = contraction_stat(pair);
  RateFit f;
  if (!(c.initial > 0.0)) return f;
  double stl = 0.0, stt = 0.0;
  f.max_rate = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < c.mean_sq.size(); ++k) {
    if (!(c.mean_sq[k] > 0.0)) continue;
    const double t = static_cast<double>(k) * pair.dt;
    const double l = std::log(c.mean_sq[k] / c.initial);
    stl += t * l;
    stt += t * t;
    f.max_rate = std::max(f.max_rate, l / t);
  }
  if (stt > 0.0) f.slope = stl / stt;
  if (!std::isfinite(f.max_rate)) f.max_rate = 0.0;
  return f;
}

EpsRateTable eps_rate_stat(std::span<const PairedEnsemble> ladder, double band_lo, double band_hi) {
  EpsRateTable t;
  for (const PairedEnsemble& pe : ladder) {
    std::vector<double> v;
    for (std::size_t p = 0; p < pe.sup_weighted.size(); ++p)
      if (!pe.a.paths[p].failed && !pe.b.paths[p].failed) v.push_back(pe.sup_weighted[p]);
    EpsRung r{pe.a.config.eps, pe.b.config.eps, batch_mean(v), std::nullopt};
    if (!t.rungs.empty()) {
      const double prev = t.rungs.back().D.mean;
      if (!(r.D.mean < prev)) t.strictly_decreasing = false;
      if (prev > 0.0) {
        r.ratio = r.D.mean / prev;
        if (*r.ratio < band_lo || *r.ratio > band_hi) t.ratios_in_band = false;
      } else {
        t.ratios_in_band = false;
      }
    }
    t.rungs.push_back(r);
  }
  return t;
}

namespace {

// ⟨−Δφ^ε(y), u − y⟩_{H⁻¹} computed as an H⁻¹ pairing, not via the L² identity.
double drift_pairing(const DirichletLaplacian& L, const RegularizedPotential& rp,
                     std::span<const double> y, std::span<const double> u) {
  const std::size_t n = y.size();
  const double h = L.grid().spacing();
  std::vector<double> phi(n), dphi(n), lphi(n), e(n), w(n);
  rp.apply_yosida(y, phi, dphi);
  L.apply(phi, lphi);
  for (std::size_t i = 0; i < n; ++i) {
    lphi[i] = -lphi[i];
    e[i] = u[i] - y[i];
  }
  L.solve_negative(e, w);
  return h * simd::dot(lphi, w);
}

double moreau_integral(const RegularizedPotential& rp, std::span<const double> u, double h) {
  double s = 0.0;
  for (double v : u) s += moreau_psi_eps(rp, v);
  return h * s;
}

void require_len(const DirichletLaplacian& L, std::span<const double> y, std::span<const double> u) {
  if (y.size() != L.grid().size() || u.size() != L.grid().size())
    throw GridMismatch("subgradient margin: field length does not match the grid");
}

}  // namespace

double moreau_subgradient_margin(const DirichletLaplacian& L, const RegularizedPotential& rp,
                                 std::span<const double> y, std::span<const double> u) {
  require_len(L, y, u);
  const double h = L.grid().spacing();
  return moreau_integral(rp, u, h) - moreau_integral(rp, y, h) - drift_pairing(L, rp, y, u);
}

double energy_subgradient_margin(const DirichletLaplacian& L, const RegularizedPotential& rp,
                                 std::span<const double> y, std::span<const double> u) {
  require_len(L, y, u);
  const Grid& g = L.grid();
  const double h = g.spacing();
  const double y2 = h * simd::dot(y, y);
  const double slack =
      rp.base().growth_constant() * rp.epsilon() * std::max(1.0, g.length()) * (1.0 + y2);
  return energy(rp.base(), u, h) + slack - energy(rp.base(), y, h) - drift_pairing(L, rp, y, u);
}

}  // namespace svilab
