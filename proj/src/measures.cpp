#include "svilab/measures.hpp"

#include <algorithm>
#include <cmath>

#include "svilab/error.hpp"
#include "svilab/simd/kernels.hpp"

namespace svilab {

namespace {

// Linear interpolation of a node field with zero boundary values; zero outside [a, b].
double node_interp(const Field& u, double x) {
  const Grid& g = u.grid;
  if (!(x > g.a() && x < g.b())) return 0.0;
  const double s = (x - g.a()) / g.spacing();
  const double fl = std::floor(s);
  const auto l = static_cast<std::ptrdiff_t>(fl);
  const double t = s - fl;
  auto at = [&](std::ptrdiff_t node) -> double {
    if (node <= 0 || node >= static_cast<std::ptrdiff_t>(g.cells())) return 0.0;
    return u.values[static_cast<std::size_t>(node - 1)];
  };
  if (t == 0.0) return at(l);
  return (1.0 - t) * at(l) + t * at(l + 1);
}

// Linear interpolation between cell midpoints, constant on the two half
// cells at the ends, zero outside [a, b].
double density_interp(const RadonMeasure& mu, double x) {
  const Grid& g = mu.grid();
  if (!(x >= g.a() && x <= g.b())) return 0.0;
  const auto& d = mu.density();
  const double s = (x - g.a()) / g.spacing() - 0.5;
  if (s <= 0.0) return d.front();
  const double last = static_cast<double>(d.size() - 1);
  if (s >= last) return d.back();
  const double fl = std::floor(s);
  const auto k = static_cast<std::size_t>(fl);
  const double t = s - fl;
  if (t == 0.0) return d[k];
  return (1.0 - t) * d[k] + t * d[k + 1];
}

double smooth_step(double t) noexcept {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double f = std::exp(-1.0 / t);
  const double g = std::exp(-1.0 / (1.0 - t));
  return f / (f + g);
}

}  // namespace

// ---------------------------------------------------------------------------
// RadonMeasure

RadonMeasure::RadonMeasure(const Grid& grid) : grid_(grid), density_(grid.cells(), 0.0) {}

RadonMeasure::RadonMeasure(const Grid& grid, std::vector<double> density, std::vector<Atom> atoms)
    : grid_(grid), density_(std::move(density)) {
  if (density_.size() != grid.cells())
    throw ParamError("measure: density needs one value per cell");
  for (double v : density_)
    if (!std::isfinite(v)) throw ParamError("measure: non-finite density value");
  std::sort(atoms.begin(), atoms.end(), [](const Atom& p, const Atom& q) { return p.x < q.x; });
  for (const Atom& at : atoms) {
    if (!(at.x > grid.a() && at.x < grid.b()))
      throw ParamError("measure: atom location must be strictly inside the domain");
    if (!std::isfinite(at.mass)) throw ParamError("measure: non-finite atom mass");
    if (!atoms_.empty() && atoms_.back().x == at.x)
      atoms_.back().mass += at.mass;
    else
      atoms_.push_back(at);
  }
  std::erase_if(atoms_, [](const Atom& at) { return at.mass == 0.0; });
}

RadonMeasure RadonMeasure::from_density(const Grid& grid, const std::function<double(double)>& h,
                                        std::vector<Atom> atoms) {
  std::vector<double> d(grid.cells());
  for (std::size_t k = 0; k < d.size(); ++k)
    d[k] = h(grid.a() + (static_cast<double>(k) + 0.5) * grid.spacing());
  return RadonMeasure(grid, std::move(d), std::move(atoms));
}

double RadonMeasure::total_mass() const noexcept {
  double s = 0.0;
  for (double v : density_) s += v;
  s *= grid_.spacing();
  for (const Atom& at : atoms_) s += at.mass;
  return s;
}

bool RadonMeasure::is_zero() const noexcept {
  return atoms_.empty() && std::all_of(density_.begin(), density_.end(),
                                       [](double v) { return v == 0.0; });
}

double tv_norm(const RadonMeasure& mu) {
  double s = mu.grid().spacing() * simd::sum_abs(mu.density());
  for (const Atom& at : mu.atoms()) s += std::fabs(at.mass);
  return s;
}

double pairing(const RadonMeasure& mu, const std::function<double(double)>& eta) {
  double s = 0.0;
  for (std::size_t k = 0; k < mu.density().size(); ++k)
    s += mu.density()[k] * eta(mu.cell_midpoint(k));
  s *= mu.grid().spacing();
  for (const Atom& at : mu.atoms()) s += at.mass * eta(at.x);
  return s;
}

RadonMeasure psi_of_measure(const Potential& psi, const RadonMeasure& mu) {
  if (psi.growth_class() != GrowthClass::Sublinear)
    throw GrowthClassError("psi_of_measure: potential is superlinear");
  std::vector<double> d(mu.density().size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = psi.value(mu.density()[k]);
  std::vector<Atom> atoms;
  for (const Atom& at : mu.atoms()) atoms.push_back({at.x, recession(psi, at.mass)});
  return RadonMeasure(mu.grid(), std::move(d), std::move(atoms));
}

RadonMeasure extend_by_zero(const RadonMeasure& mu, const Grid& larger) {
  const Grid& g = mu.grid();
  const double h = g.spacing();
  if (std::fabs(larger.spacing() - h) > 1e-12 * h)
    throw GridMismatch("extend_by_zero: spacing differs");
  const double off = (g.a() - larger.a()) / h;
  const double offr = std::round(off);
  if (off < -1e-9 || std::fabs(off - offr) > 1e-9 || g.b() > larger.b() + 1e-12 * h)
    throw GridMismatch("extend_by_zero: target grid does not contain the source cells");
  const auto shift = static_cast<std::size_t>(offr);
  if (shift + g.cells() > larger.cells())
    throw GridMismatch("extend_by_zero: target grid too short");
  std::vector<double> d(larger.cells(), 0.0);
  std::copy(mu.density().begin(), mu.density().end(), d.begin() + static_cast<std::ptrdiff_t>(shift));
  return RadonMeasure(larger, std::move(d), mu.atoms());
}

Field embed_measure(const RadonMeasure& mu) {
  const Grid& g = mu.grid();
  Field u(g);
  const auto& d = mu.density();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = 0.5 * (d[i] + d[i + 1]);
  const double h = g.spacing();
  for (const Atom& at : mu.atoms()) {
    const double s = (at.x - g.a()) / h;
    const double fl = std::floor(s);
    const auto l = static_cast<std::size_t>(fl);
    const double t = s - fl;
    if (l >= 1) u[l - 1] += at.mass * (1.0 - t) / h;
    if (l + 1 <= u.size() && t > 0.0) u[l] += at.mass * t / h;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Energies

EnergyFunctional::EnergyFunctional(Potential p)
    : potential(std::move(p)),
      regime(potential.growth_class() == GrowthClass::Sublinear ? EnergyRegime::SublinearTv
                                                                : EnergyRegime::SuperlinearIntegral) {}

double energy(const Potential& psi, std::span<const double> u, double h) {
  double s = 0.0;
  for (double v : u) s += psi.value(v);
  return h * s;
}

double energy(const EnergyFunctional& f, const RadonMeasure& mu) {
  const double ac = energy(f.potential, mu.density(), mu.grid().spacing());
  if (mu.atoms().empty()) return ac;
  if (f.regime == EnergyRegime::SuperlinearIntegral) return kInf;
  double s = 0.0;
  for (const Atom& at : mu.atoms()) s += std::fabs(at.mass);
  return ac + f.potential.recession_slope() * s;
}

double energy(const EnergyFunctional& f, const Field& u) {
  return energy(f.potential, u.span(), u.grid.spacing());
}

// ---------------------------------------------------------------------------
// Boundary cover

BoundaryCover::BoundaryCover(double a, double b, double chart_height,
                             std::optional<double> interior_margin)
    : a_(a), b_(b), hstar_(chart_height), m_(interior_margin.value_or(chart_height / 2.0)) {
  if (!(chart_height > 0.0)) throw ParamError("boundary cover: chart height must be positive");
  if (b - a < 4.0 * chart_height)
    throw DomainTooSmall("boundary cover: interval shorter than four chart heights");
  if (!(m_ > 0.0 && m_ < 2.0 * chart_height))
    throw ParamError("boundary cover: interior margin must lie in (0, 2h*)");
}

double BoundaryCover::zeta(int j, double x) const noexcept {
  const double w = 2.0 * hstar_ - m_;
  const double z1 = 1.0 - smooth_step((x - a_ - m_) / w);
  const double z2 = 1.0 - smooth_step((b_ - m_ - x) / w);
  if (j == 1) return z1;
  if (j == 2) return z2;
  return std::max(0.0, 1.0 - z1 - z2);
}

double BoundaryCover::margin(double eps) const {
  if (!(eps > 0.0)) throw ParamError("boundary margin: eps must be positive");
  return std::min({m_, eps / 2.0, hstar_ / 4.0});
}

double boundary_margin(double eps, double a, double b, double chart_height) {
  return BoundaryCover(a, b, chart_height).margin(eps);
}

ShiftMollifyParams default_params(const BoundaryCover& cover, double eps) {
  const double w = cover.margin(eps);
  return {eps, w / 2.0, w};
}

RadonMeasure shift_measure(const RadonMeasure& mu, double eps, const BoundaryCover& cover) {
  if (!(eps > 0.0)) throw ParamError("shift_measure: eps must be positive");
  const Grid& g = mu.grid();
  std::vector<double> d(g.cells(), 0.0);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const double y = mu.cell_midpoint(k);
    double s = cover.zeta(0, y) * mu.density()[k];
    for (int j = 1; j <= 2; ++j) {
      const double src = y + eps * BoundaryCover::direction(j);
      const double z = cover.zeta(j, src);
      if (z > 0.0) s += z * density_interp(mu, src);
    }
    d[k] = s;
  }
  std::vector<Atom> atoms;
  for (const Atom& at : mu.atoms()) {
    for (int j = 0; j <= 2; ++j) {
      const double z = cover.zeta(j, at.x);
      if (z <= 0.0) continue;
      const double dst = at.x - eps * BoundaryCover::direction(j);
      if (dst > g.a() && dst < g.b()) atoms.push_back({dst, at.mass * z});
    }
  }
  return RadonMeasure(g, std::move(d), std::move(atoms));
}

RadonMeasure shift_measure(const RadonMeasure& mu, double eps) {
  return shift_measure(mu, eps, BoundaryCover(mu.grid().a(), mu.grid().b()));
}

// ---------------------------------------------------------------------------
// Mollification

double bump(double r, double delta) noexcept {
  const double q = r / delta;
  const double q2 = q * q;
  if (!(q2 < 1.0)) return 0.0;
  return std::exp(-1.0 / (1.0 - q2));
}

namespace {

// Σ_l K((l + phase) h) h over all integers l.
double lattice_sum(double phase, double h, double delta) {
  const auto reach = static_cast<long>(std::ceil(delta / h)) + 1;
  double s = 0.0;
  for (long l = -reach; l <= reach; ++l) s += bump((static_cast<double>(l) + phase) * h, delta);
  return s * h;
}

}  // namespace

double mollifier_peak(double delta, double h) noexcept {
  double smin = kInf;
  for (int p = 0; p <= 256; ++p) smin = std::min(smin, lattice_sum(p / 256.0, h, delta));
  if (smin <= 0.0) return 1.0 / h;
  return std::max(bump(0.0, delta) / smin, 1.0 / h);
}

Field mollify(const RadonMeasure& mu, double delta) {
  if (!(delta > 0.0)) throw ParamError("mollify: delta must be positive");
  const Grid& g = mu.grid();
  const double h = g.spacing();
  const std::size_t n = g.size();
  const auto& d = mu.density();
  Field u(g);

  // node i sits at offset (i - k + 1/2) h from cell k
  const double sd = lattice_sum(0.5, h, delta);
  if (sd > 0.0) {
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(delta / h)) + 1;
    std::vector<double> w(static_cast<std::size_t>(2 * reach + 1));
    for (std::ptrdiff_t j = -reach; j <= reach; ++j)
      w[static_cast<std::size_t>(j + reach)] = bump((static_cast<double>(j) + 0.5) * h, delta) * h / sd;
    const auto cells = static_cast<std::ptrdiff_t>(d.size());
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::ptrdiff_t j = -reach; j <= reach; ++j) {
        const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i) - j;
        if (k < 0 || k >= cells) continue;
        s += w[static_cast<std::size_t>(j + reach)] * d[static_cast<std::size_t>(k)];
      }
      u[i] = s;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) u[i] = 0.5 * (d[i] + d[i + 1]);
  }

  for (const Atom& at : mu.atoms()) {
    const double s = (at.x - g.a()) / h;
    const double phase = s - std::floor(s);
    const double sx = lattice_sum(phase, h, delta);
    const auto nodes = static_cast<std::ptrdiff_t>(g.cells());
    if (sx > 0.0) {
      const auto lo = static_cast<std::ptrdiff_t>(std::floor((at.x - delta - g.a()) / h));
      const auto hi = static_cast<std::ptrdiff_t>(std::ceil((at.x + delta - g.a()) / h));
      for (std::ptrdiff_t l = std::max<std::ptrdiff_t>(lo, 1); l <= std::min(hi, nodes - 1); ++l) {
        const double x = g.a() + static_cast<double>(l) * h;
        u[static_cast<std::size_t>(l - 1)] += at.mass * bump(x - at.x, delta) / sx;
      }
    } else {
      const auto l = static_cast<std::ptrdiff_t>(std::floor(s));
      if (l >= 1 && l <= nodes - 1) u[static_cast<std::size_t>(l - 1)] += at.mass * (1.0 - phase) / h;
      if (phase > 0.0 && l + 1 >= 1 && l + 1 <= nodes - 1)
        u[static_cast<std::size_t>(l)] += at.mass * phase / h;
    }
  }
  return u;
}

namespace {

// Dual shift of a node field: u(xᵢ) = Σⱼ ζʲ(xᵢ + ε eʲ) f̄(xᵢ + ε eʲ).
Field gather_shift(const Field& f, double eps, const BoundaryCover& cover) {
  Field u(f.grid);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = f.grid.node(i);
    double s = cover.zeta(0, x) * f[i];
    for (int j = 1; j <= 2; ++j) {
      const double src = x + eps * BoundaryCover::direction(j);
      const double z = cover.zeta(j, src);
      if (z > 0.0) s += z * node_interp(f, src);
    }
    u[i] = s;
  }
  return u;
}

}  // namespace

Field shift_mollify(const RadonMeasure& mu, const ShiftMollifyParams& p, const BoundaryCover& cover) {
  const double w = cover.margin(p.eps);
  if (!(p.delta > 0.0)) throw ParamError("shift_mollify: delta must be positive");
  if (p.boundary_margin > w * (1.0 + 1e-12))
    throw ParamError("shift_mollify: declared boundary margin exceeds w(eps)");
  if (p.delta > 0.5 * p.boundary_margin * (1.0 + 1e-12))
    throw ParamError("shift_mollify: delta exceeds w(eps)/2");
  return gather_shift(mollify(mu, p.delta), p.eps, cover);
}

Field shift_mollify(const RadonMeasure& mu, const ShiftMollifyParams& p) {
  return shift_mollify(mu, p, BoundaryCover(mu.grid().a(), mu.grid().b()));
}

Field approx_sequence(const RadonMeasure& mu, std::size_t n, const BoundaryCover& cover) {
  if (n < 1) throw ParamError("approx_sequence: n must be positive");
  return shift_mollify(mu, default_params(cover, 1.0 / static_cast<double>(n)), cover);
}

Field approx_sequence(const RadonMeasure& mu, std::size_t n) {
  return approx_sequence(mu, n, BoundaryCover(mu.grid().a(), mu.grid().b()));
}

Field shift_field(const Field& eta, double eps, const BoundaryCover& cover) {
  if (!(eps > 0.0)) throw ParamError("shift_field: eps must be positive");
  Field out(eta.grid);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = eta.grid.node(i);
    double s = 0.0;
    for (int j = 0; j <= 2; ++j) {
      const double z = cover.zeta(j, x);
      if (z > 0.0) s += z * node_interp(eta, x - eps * BoundaryCover::direction(j));
    }
    out[i] = s;
  }
  return out;
}

Field mollify_field(const Field& eta, double delta) {
  if (!(delta > 0.0)) throw ParamError("mollify_field: delta must be positive");
  const double h = eta.grid.spacing();
  const double s0 = lattice_sum(0.0, h, delta);
  const auto reach = static_cast<std::ptrdiff_t>(std::ceil(delta / h));
  const auto n = static_cast<std::ptrdiff_t>(eta.size());
  Field out(eta.grid);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::ptrdiff_t l = -reach; l <= reach; ++l) {
      const std::ptrdiff_t k = i - l;
      if (k < 0 || k >= n) continue;
      s += bump(static_cast<double>(l) * h, delta) * h * eta[static_cast<std::size_t>(k)];
    }
    out[static_cast<std::size_t>(i)] = s / s0;
  }
  return out;
}

}  // namespace svilab
