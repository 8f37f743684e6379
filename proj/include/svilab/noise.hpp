#pragma once

// Truncated cylindrical Wiener noise expanded in the discrete sine modes and
// the diffusion coefficient B(x) dW = gain Σ bᵢ σ(x) eᵢ dwᵢ.
//
// Increments are drawn from a counter-based generator keyed by
// (seed, path, step), so any path can be regenerated without replaying the
// others and concurrent paths never share state.

#include <cstdint>
#include <span>
#include <vector>

#include "svilab/discrete.hpp"

namespace svilab {

enum class Multiplier { Additive, LipschitzDiagonal };

const char* to_string(Multiplier m) noexcept;

struct NoiseConfig {
  std::size_t modes = 16;
  /// bᵢ, i = 1..modes. Empty means bᵢ = 1/i.
  std::vector<double> weights;
  Multiplier multiplier = Multiplier::Additive;
  double gain = 1.0;
  /// σ(x) = min(|x|, sigma_cap) for the diagonal multiplier.
  double sigma_cap = 1.0;
  std::uint64_t seed = 0;
};

struct WienerIncrement {
  double dt = 0.0;
  std::vector<double> gaussians;
};

class NoiseModel {
 public:
  /// Throws ParamError / ModeOutOfRange.
  NoiseModel(const Grid& grid, NoiseConfig cfg);

  const Grid& grid() const noexcept { return grid_; }
  const NoiseConfig& config() const noexcept { return cfg_; }
  std::size_t modes() const noexcept { return cfg_.modes; }
  double weight(std::size_t i) const noexcept { return cfg_.weights[i]; }
  /// Unit-H⁻¹ sine modes e₁..eₙ.
  const std::vector<Field>& basis() const noexcept { return basis_; }
  bool is_zero() const noexcept { return cfg_.gain == 0.0; }

  double sigma(double x) const noexcept;
  /// Lipschitz constant of σ (1 for the diagonal multiplier, 0 for additive).
  double sigma_lipschitz() const noexcept;

  /// dt-scaled N(0, dt) draws for (path, step), written into `dw`.
  void draw(std::uint64_t path, std::uint64_t step, double dt, std::span<double> dw) const;
  WienerIncrement sample_increment(double dt, std::uint64_t path, std::uint64_t step) const;

  /// out = B(x) dw.
  void apply(std::span<const double> x, std::span<const double> dw, std::span<double> out) const;
  Field apply_B(double t, const Field& x, const WienerIncrement& dw) const;

  /// Σ bᵢ² gain², the squared HS norm of the additive coefficient into H⁻¹.
  double hs_sq_hminus1_additive() const noexcept;
  /// gain² Σ bᵢ² ‖eᵢ‖²_∞.
  double sup_weight_sq() const noexcept;

 private:
  Grid grid_;
  NoiseConfig cfg_;
  std::vector<Field> basis_;
  // gain·bᵢ·eᵢ stored contiguously, mode-major
  std::vector<double> columns_;
};

/// Reproducible standard normals from a counter: Box–Muller over SplitMix64
/// hashes of (seed, path, step, index).
void counter_normals(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                     std::span<double> out);

struct NoiseReport {
  /// max ‖B(v) − B(w)‖_{HS→H⁻¹} / ‖v − w‖_{H⁻¹} over sampled pairs.
  double lipschitz_hminus1 = 0.0;
  /// max ‖B(v) − B(w)‖_{HS→L²} / ‖v − w‖_{L²} over sampled pairs.
  double lipschitz_l2 = 0.0;
  /// Provable bound for lipschitz_l2: gain · Lip(σ) · sqrt(Σ bᵢ² ‖eᵢ‖²_∞).
  double declared_lipschitz_l2 = 0.0;
  /// max ‖B(v)‖²_{HS→L²} / (1 + ‖v‖²_{L²}).
  double growth = 0.0;
  double declared_growth = 0.0;
  /// ‖B(0)‖²_{HS→H⁻¹}.
  double b0_sq = 0.0;
  double declared_b0_sq = 0.0;
  bool violation = false;
};

/// Squared HS norm of B(v) into H⁻¹ (or into L² with `l2` set).
double hs_norm_sq(const NoiseModel& nm, const DirichletLaplacian& L, std::span<const double> v,
                  bool l2);
/// Squared HS norm of B(v) − B(w).
double hs_diff_sq(const NoiseModel& nm, const DirichletLaplacian& L, std::span<const double> v,
                  std::span<const double> w, bool l2);

NoiseReport check_noise_conditions(const NoiseModel& nm, const std::vector<Field>& samples);

}  // namespace svilab
