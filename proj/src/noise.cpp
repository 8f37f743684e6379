#include "svilab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "svilab/error.hpp"
#include "svilab/simd/kernels.hpp"

namespace svilab {

const char* to_string(Multiplier m) noexcept {
  return m == Multiplier::Additive ? "ADDITIVE" : "LIPSCHITZ_DIAGONAL";
}

namespace {

constexpr std::uint64_t splitmix(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void counter_normals(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                     std::span<double> out) {
  const std::uint64_t key = splitmix(splitmix(splitmix(seed) ^ path) ^ (step * 0xd1342543de82ef95ULL));
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const std::uint64_t r1 = splitmix(key ^ (2 * i + 1));
    const std::uint64_t r2 = splitmix(key ^ (2 * i + 2));
    const double u1 = (static_cast<double>(r1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(r2 >> 11) * 0x1.0p-53;          // [0, 1)
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    out[i] = rad * std::cos(ang);
    if (i + 1 < out.size()) out[i + 1] = rad * std::sin(ang);
  }
}

NoiseModel::NoiseModel(const Grid& grid, NoiseConfig cfg) : grid_(grid), cfg_(std::move(cfg)) {
  if (cfg_.modes < 1) throw ParamError("noise: need at least one mode");
  if (cfg_.weights.empty()) {
    cfg_.weights.resize(cfg_.modes);
    for (std::size_t i = 0; i < cfg_.modes; ++i) cfg_.weights[i] = 1.0 / static_cast<double>(i + 1);
  }
  if (cfg_.weights.size() != cfg_.modes) throw ParamError("noise: need one weight per mode");
  for (double b : cfg_.weights)
    if (!(b >= 0.0) || !std::isfinite(b)) throw ParamError("noise: weights must be finite and >= 0");
  if (!(cfg_.gain >= 0.0) || !std::isfinite(cfg_.gain)) throw ParamError("noise: gain must be >= 0");
  if (!(cfg_.sigma_cap > 0.0)) throw ParamError("noise: sigma cap must be positive");
  const std::size_t n = grid.size();
  columns_.assign(cfg_.modes * n, 0.0);
  for (std::size_t i = 0; i < cfg_.modes; ++i) {
    basis_.push_back(sine_mode(grid, i + 1));
    const double c = cfg_.gain * cfg_.weights[i];
    for (std::size_t j = 0; j < n; ++j) columns_[i * n + j] = c * basis_.back()[j];
  }
}

double NoiseModel::sigma(double x) const noexcept {
  if (cfg_.multiplier == Multiplier::Additive) return 1.0;
  return std::min(std::fabs(x), cfg_.sigma_cap);
}

double NoiseModel::sigma_lipschitz() const noexcept {
  return cfg_.multiplier == Multiplier::Additive ? 0.0 : 1.0;
}

void NoiseModel::draw(std::uint64_t path, std::uint64_t step, double dt, std::span<double> dw) const {
  counter_normals(cfg_.seed, path, step, dw);
  const double s = std::sqrt(dt);
  for (double& v : dw) v *= s;
}

WienerIncrement NoiseModel::sample_increment(double dt, std::uint64_t path, std::uint64_t step) const {
  if (!(dt > 0.0)) throw ParamError("sample_increment: dt must be positive");
  WienerIncrement w{dt, std::vector<double>(cfg_.modes)};
  draw(path, step, dt, w.gaussians);
  return w;
}

void NoiseModel::apply(std::span<const double> x, std::span<const double> dw,
                       std::span<double> out) const {
  const std::size_t n = grid_.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < cfg_.modes; ++i)
    simd::axpy(dw[i], std::span<const double>(columns_.data() + i * n, n), out);
  if (cfg_.multiplier == Multiplier::LipschitzDiagonal)
    for (std::size_t j = 0; j < n; ++j) out[j] *= sigma(x[j]);
}

Field NoiseModel::apply_B(double, const Field& x, const WienerIncrement& dw) const {
  require_same_grid(grid_, x.grid, "apply_B");
  if (dw.gaussians.size() != cfg_.modes) throw ParamError("apply_B: increment has wrong length");
  Field out(grid_);
  apply(x.span(), dw.gaussians, out.span());
  return out;
}

double NoiseModel::hs_sq_hminus1_additive() const noexcept {
  double s = 0.0;
  for (double b : cfg_.weights) s += b * b;
  return cfg_.gain * cfg_.gain * s;
}

double NoiseModel::sup_weight_sq() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < cfg_.modes; ++i) {
    double m = 0.0;
    for (double v : basis_[i].values) m = std::max(m, std::fabs(v));
    s += cfg_.weights[i] * cfg_.weights[i] * m * m;
  }
  return cfg_.gain * cfg_.gain * s;
}

namespace {

double hs_generic(const NoiseModel& nm, const DirichletLaplacian& L, std::span<const double> mult,
                  bool l2) {
  const std::size_t n = nm.grid().size();
  const double h = nm.grid().spacing();
  const double g = nm.config().gain;
  std::vector<double> col(n), tmp(n);
  double s = 0.0;
  for (std::size_t i = 0; i < nm.modes(); ++i) {
    const double c = g * nm.weight(i);
    if (c == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) col[j] = c * mult[j] * nm.basis()[i][j];
    if (l2) {
      s += h * simd::dot(col, col);
    } else {
      L.solve_negative(col, tmp);
      s += h * simd::dot(col, tmp);
    }
  }
  return s;
}

}  // namespace

double hs_norm_sq(const NoiseModel& nm, const DirichletLaplacian& L, std::span<const double> v,
                  bool l2) {
  std::vector<double> m(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) m[j] = nm.sigma(v[j]);
  return hs_generic(nm, L, m, l2);
}

double hs_diff_sq(const NoiseModel& nm, const DirichletLaplacian& L, std::span<const double> v,
                  std::span<const double> w, bool l2) {
  std::vector<double> m(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) m[j] = nm.sigma(v[j]) - nm.sigma(w[j]);
  return hs_generic(nm, L, m, l2);
}

NoiseReport check_noise_conditions(const NoiseModel& nm, const std::vector<Field>& samples) {
  const DirichletLaplacian L(nm.grid());
  NoiseReport r;
  const double sw = nm.sup_weight_sq();
  r.declared_lipschitz_l2 = nm.sigma_lipschitz() * std::sqrt(sw);
  r.declared_growth = sw * std::max(1.0, nm.grid().length());
  r.declared_b0_sq =
      nm.config().multiplier == Multiplier::Additive ? nm.hs_sq_hminus1_additive() : 0.0;
  const Field zero(nm.grid());
  r.b0_sq = hs_norm_sq(nm, L, zero.span(), false);
  for (std::size_t p = 0; p < samples.size(); ++p) {
    const Field& v = samples[p];
    require_same_grid(nm.grid(), v.grid, "check_noise_conditions");
    const double nv = l2_norm(v);
    r.growth = std::max(r.growth, hs_norm_sq(nm, L, v.span(), true) / (1.0 + nv * nv));
    for (std::size_t q = p + 1; q < samples.size(); ++q) {
      const Field d = v - samples[q];
      const double dh = hminus1_norm(L, d);
      const double dl = l2_norm(d);
      if (dh > 0.0)
        r.lipschitz_hminus1 = std::max(
            r.lipschitz_hminus1, std::sqrt(hs_diff_sq(nm, L, v.span(), samples[q].span(), false)) / dh);
      if (dl > 0.0)
        r.lipschitz_l2 = std::max(
            r.lipschitz_l2, std::sqrt(hs_diff_sq(nm, L, v.span(), samples[q].span(), true)) / dl);
    }
  }
  r.violation = r.lipschitz_l2 > r.declared_lipschitz_l2 * (1.0 + 1e-12) + 1e-12 ||
                r.growth > r.declared_growth * (1.0 + 1e-12) + 1e-12 ||
                r.b0_sq > r.declared_b0_sq * (1.0 + 1e-9) + 1e-12;
  return r;
}

}  // namespace svilab
