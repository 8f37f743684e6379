#pragma once

// Time stepping for dX = εΔX dt + Δφ^ε(X) dt + B(X) dW on a Dirichlet grid.
//
// IMPLICIT_MONOTONE solves y − dt Δ(εy + φ^ε(y)) = x + B(x)dw. It is written
// in the pressure w = εy + φ^ε(y), y = β(w), as β(w) − dt Δw = x + B(x)dw,
// the gradient of the strongly convex functional
//   E(w) = ∫B(w) + (dt/2)‖∇w‖² − ∫(x + B(x)dw) w,   B' = β,
// whose Hessian diag(β'(w)) − dt Δ is tridiagonal. Semismooth Newton
// directions with an exact line search on E converge globally; the step is
// then halved until the H⁻¹ residual y − x − B(x)dw − dt Δw drops as well,
// which keeps both sequences monotone. Iteration stops on that residual.
// SEMI_IMPLICIT treats εΔ implicitly and Δφ^ε explicitly and is only stable
// for dt ≤ εh²/4.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svilab/convex.hpp"
#include "svilab/discrete.hpp"
#include "svilab/noise.hpp"

namespace svilab {

enum class Scheme { ImplicitMonotone, SemiImplicit };

const char* to_string(Scheme s) noexcept;

struct SolverConfig {
  Grid grid{0.0, 1.0, 64};
  Potential potential = Potential::psi1();
  double eps = 0.1;
  double dt = 1e-3;
  double t_end = 1.0;
  Scheme scheme = Scheme::ImplicitMonotone;
  double newton_tol = 1e-10;
  int newton_max_iter = 200;
  NoiseConfig noise;
  std::size_t paths = 1;
  /// 0 selects max(1, floor(steps/256)).
  std::size_t snapshot_every = 0;
  bool keep_snapshots = true;
  /// Worker threads over paths; 0 means hardware concurrency.
  unsigned threads = 1;
  /// Weight e^{−Kt} of the coupled sup statistic.
  double K = 0.0;

  /// Throws ParamError, StabilityViolation.
  void validate() const;
  std::size_t steps() const;
  std::size_t cadence() const;
};

struct StepDiagnostics {
  int iterations = 0;
  /// H⁻¹ residual of the initial guess and after each Newton update;
  /// strictly decreasing unless the halving budget ran out.
  std::vector<double> residuals;
  /// Step functional E(w) along the same iterates, nonincreasing.
  std::vector<double> energies;
};

/// Shared read-only machinery of one configuration.
class Stepper {
 public:
  explicit Stepper(const SolverConfig& cfg);

  const SolverConfig& config() const noexcept { return cfg_; }
  const DirichletLaplacian& laplacian() const noexcept { return L_; }
  const RegularizedPotential& regularized() const noexcept { return rp_; }
  const NoiseModel& noise() const noexcept { return noise_; }

  struct Workspace {
    std::vector<double> r, w, w0, y, dy, res, tmp, delta, ldelta, trial, ty, tdy, sub, diag, sup,
        work, dw, noise;
  };
  Workspace make_workspace() const;

  /// Advances x in place by one step driven by the increment `dw`.
  /// Throws NewtonDivergence.
  void step(std::vector<double>& x, std::span<const double> dw, Workspace& ws,
            StepDiagnostics* diag = nullptr) const;

  /// Drift L(εy + φ^ε(y)) evaluated at y.
  void drift(std::span<const double> y, std::span<double> out) const;

  /// Pressure w = g(y) = εy + φ^ε(y) and its inverse y = β(w) with β'(w).
  void pressure(std::span<const double> y, std::span<double> w) const;
  void inverse_pressure(std::span<const double> w, std::span<double> y,
                        std::span<double> dy) const;

  /// ∫ψ^ε(u)dx and ∫ψ(u)dx with node quadrature.
  double moreau_energy(std::span<const double> u) const;
  double energy(std::span<const double> u) const;

 private:
  double residual(Workspace& ws) const;
  double line_search(Workspace& ws) const;
  double step_energy(Workspace& ws) const;

  SolverConfig cfg_;
  DirichletLaplacian L_;
  RegularizedPotential rp_;
  NoiseModel noise_;
  std::optional<simd::PwlTable> g_table_;
  std::optional<simd::PwlTable> beta_table_;
};

Field step(const SolverConfig& cfg, const Field& x, double t, const WienerIncrement& dw,
           StepDiagnostics* diag = nullptr);

struct PathRecord {
  /// Snapshot values at the save times, time-major (save × nodes).
  std::vector<double> snapshots;
  double sup_l2_sq = 0.0;
  double int_h10_sq = 0.0;
  double int_moreau = 0.0;
  double int_energy = 0.0;
  bool failed = false;
  std::string error;
  std::size_t failed_step = 0;
};

struct PathEnsemble {
  SolverConfig config;
  std::vector<double> save_times;
  std::vector<PathRecord> paths;

  std::size_t nodes() const noexcept { return config.grid.size(); }
  std::span<const double> snapshot(std::size_t path, std::size_t save) const;
  bool any_failed() const noexcept;
};

/// Times of the saved snapshots: 0, every cadence() steps, and t_end.
std::vector<double> save_schedule(const SolverConfig& cfg);

PathEnsemble simulate(const SolverConfig& cfg, const Field& x0);

struct PairedEnsemble {
  PathEnsemble a, b;
  /// ‖X_n − Y_n‖²_{H⁻¹} at every step, per path.
  std::vector<std::vector<double>> diff_sq;
  /// sup_n e^{−K t_n} ‖X_n − Y_n‖²_{H⁻¹}, per path.
  std::vector<double> sup_weighted;
  double dt = 0.0;
};

/// Runs both configurations on identical increments. Throws ConfigMismatch
/// unless grids, dt, horizon, noise, seed and path counts agree.
PairedEnsemble coupled_simulate(const SolverConfig& cfg_a, const SolverConfig& cfg_b,
                                const Field& x0_a, const Field& x0_b);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Mean with the standard error from `batches` contiguous batch means.
Estimate batch_mean(std::span<const double> per_path, std::size_t batches = 10);

struct EnergyStats {
  Estimate sup_l2_sq;
  /// ε E∫‖X‖²_{H¹₀} dt.
  Estimate eps_int_h10;
  Estimate int_moreau;
  Estimate int_energy;
  /// sup_l2_sq + eps_int_h10.
  Estimate combined;
};

EnergyStats energy_stats(const PathEnsemble& ens);

/// Parallel for over [0, n) on `threads` workers with a static partition.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace svilab
