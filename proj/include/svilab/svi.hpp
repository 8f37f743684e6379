#pragma once

// Monte-Carlo estimators for the stochastic variational inequality
//
//   E‖X_t − Z_t‖² + 2E∫φ(X) ≤ E‖x₀ − Z₀‖² + 2E∫φ(Z) − 2E∫⟨G, X − Z⟩ + C E∫‖X − Z‖²
//
// (all norms and pairings in H⁻¹) against test processes dZ = G dt + B(Z) dW
// driven by the same increments as the candidate X, plus the stability and
// ε-rate statistics of coupled ensembles.

#include <optional>
#include <span>
#include <vector>

#include "svilab/measures.hpp"
#include "svilab/solver.hpp"

namespace svilab {

enum class DriftKind { Zero, ConstantG, RegularizedSolution };

const char* to_string(DriftKind k) noexcept;

struct TestProcess {
  DriftKind kind = DriftKind::Zero;
  /// Z on the candidate's save grid; config carries grid, dt, noise, paths.
  PathEnsemble z;
  /// Constant drift (ConstantG).
  std::optional<Field> constant_g;
  /// Per path, the mean drift over each save interval, interval-major
  /// (RegularizedSolution and ensembles wrapped by from_ensemble).
  std::vector<std::vector<double>> g;

  /// Drift on [t_k, t_{k+1}) of path p.
  std::span<const double> drift(std::size_t path, std::size_t interval) const;
};

/// Simulates Z from z0 with the candidate configuration's grid, time grid,
/// noise and seed. ConstantG takes dZ = G dt + B(Z)dW stepped explicitly (the
/// drift integral is then exact); RegularizedSolution runs the implicit
/// scheme at `inner_eps` and records G = εΔZ + Δφ^ε(Z) at the implicit node.
/// Throws ParamError when G or inner_eps is missing.
TestProcess build_test_process(DriftKind kind, const SolverConfig& cfg, const Field& z0,
                               std::optional<Field> G = {}, std::optional<double> inner_eps = {});

/// Wraps a regularized ensemble as a test process. Needs every-step snapshots
/// (cadence 1); AlignmentError otherwise.
TestProcess test_process_from_ensemble(const PathEnsemble& ens);

/// max over paths and steps of ‖Z_{k+1} − Z_k − Δt G_k − B(Z_k)Δw_k‖_{H⁻¹}.
/// AlignmentError unless snapshots are saved every step.
double identity_residual(const TestProcess& tp);

/// Where the drift-side integrands are sampled on each save interval.
/// Implicit pairs them with the right endpoint, as the implicit step does;
/// the distance term under C always uses the left endpoint.
enum class Quadrature { Left, Implicit };

struct SviReport {
  std::vector<double> t;
  std::vector<Estimate> lhs, rhs, margin;
  /// Term means: E‖X−Z‖², 2E∫φ(X), E‖x₀−Z₀‖², 2E∫φ(Z), −2E∫⟨G, X−Z⟩, C E∫‖X−Z‖².
  std::vector<double> dist, int_phi_x, dist0, int_phi_z, int_pairing, int_dist;
  double constant_used = 0.0;
  std::size_t paths_used = 0;

  /// margin_t ≥ −k·se − 1e-10(1 + |lhs|) at every t.
  bool holds(double k = 2.0) const;
  /// Smallest margin/se over t (0/0 counts as 0).
  double worst_z() const;
};

/// Throws AlignmentError on mismatched grids, save times, path counts or
/// noise seeds. Paths that failed in either ensemble are dropped.
SviReport svi_margin(const PathEnsemble& x, const TestProcess& z, const EnergyFunctional& f,
                     double C, Quadrature q = Quadrature::Left);

struct NoiseRate {
  /// max over paths and save times of ‖B(X)−B(Z)‖²_{HS→H⁻¹} / ‖X−Z‖²_{H⁻¹}.
  double pathwise = 0.0;
  /// max over save times of E‖B(X)−B(Z)‖²_{HS→H⁻¹} / E‖X−Z‖²_{H⁻¹}, the rate
  /// the Gronwall term needs in expectation.
  double in_mean = 0.0;
};

NoiseRate noise_rate(const NoiseModel& nm, const PathEnsemble& a, const PathEnsemble& b);

struct ContractionReport {
  /// E‖X_n − Y_n‖²_{H⁻¹} at every step.
  std::vector<double> mean_sq;
  double initial = 0.0;
  double sup = 0.0;
  /// sup / initial (0 when both vanish).
  double ratio = 0.0;
};

ContractionReport contraction_stat(const PairedEnsemble& pair);

struct RateFit {
  /// Least-squares slope of log(E‖X_t−Y_t‖² / E‖x₀−y₀‖²) against t.
  double slope = 0.0;
  /// max_t log(ratio_t)/t.
  double max_rate = 0.0;
};

RateFit gronwall_rate(const PairedEnsemble& pair);

struct EpsRung {
  double eps = 0.0;
  double eps_half = 0.0;
  Estimate D;
  /// D(this)/D(previous); absent on the first rung.
  std::optional<double> ratio;
};

struct EpsRateTable {
  std::vector<EpsRung> rungs;
  bool strictly_decreasing = true;
  /// Every ratio inside [lo, hi]; breaches are warnings only.
  bool ratios_in_band = true;
};

/// D = E sup_t e^{−Kt}‖X^ε − X^{ε'}‖²_{H⁻¹} per rung.
EpsRateTable eps_rate_stat(std::span<const PairedEnsemble> ladder, double band_lo = 0.3,
                           double band_hi = 0.8);

/// ⟨−Δφ^ε(Y), u − Y⟩_{H⁻¹} + ∫ψ^ε(Y) ≤ ∫ψ^ε(u), returned as rhs − lhs.
double moreau_subgradient_margin(const DirichletLaplacian& L, const RegularizedPotential& rp,
                                 std::span<const double> y, std::span<const double> u);

/// The same with ψ in place of ψ^ε and slack C ε max(1,|O|)(1 + ‖Y‖²_{L²}),
/// C the growth constant of the potential. Returned as rhs − lhs.
double energy_subgradient_margin(const DirichletLaplacian& L, const RegularizedPotential& rp,
                                 std::span<const double> y, std::span<const double> u);

}  // namespace svilab
