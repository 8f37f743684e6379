#pragma once

// Signed Radon measures on an interval stored as a cell-midpoint density plus
// finitely many atoms, convex functionals of such measures, and the
// mollify-and-shift approximation by bounded densities.
//
// Shifts use a three-patch boundary cover: an interior patch with no shift and
// one chart per endpoint whose test-function shift points into the domain.
// The measure-side maps are the exact duals of the test-function maps on the
// grid, so <shift(μ), η> = <μ, shifted η> holds to rounding whenever ε is a
// multiple of the cell width.

#include <functional>
#include <optional>
#include <vector>

#include "svilab/convex.hpp"
#include "svilab/discrete.hpp"

namespace svilab {

struct Atom {
  double x;
  double mass;
};

class RadonMeasure {
 public:
  /// The zero measure. The density lives on the `grid.cells()` cell midpoints.
  explicit RadonMeasure(const Grid& grid);
  /// Atoms are sorted and coincident atoms merged; locations must lie strictly
  /// inside (a, b). Throws ParamError.
  RadonMeasure(const Grid& grid, std::vector<double> density, std::vector<Atom> atoms = {});

  static RadonMeasure from_density(const Grid& grid, const std::function<double(double)>& h,
                                   std::vector<Atom> atoms = {});

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<double>& density() const noexcept { return density_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  double cell_midpoint(std::size_t k) const noexcept {
    return grid_.a() + (static_cast<double>(k) + 0.5) * grid_.spacing();
  }
  /// μ(O).
  double total_mass() const noexcept;
  bool is_zero() const noexcept;

 private:
  Grid grid_;
  std::vector<double> density_;
  std::vector<Atom> atoms_;
};

double tv_norm(const RadonMeasure& mu);

/// ∫η dμ with midpoint quadrature on the density.
double pairing(const RadonMeasure& mu, const std::function<double(double)>& eta);

/// Density ψ(h) and atoms of mass |m| ψ_∞(1). GrowthClassError if ψ is
/// superlinear.
RadonMeasure psi_of_measure(const Potential& psi, const RadonMeasure& mu);

/// Zero extension onto a larger grid with the same spacing whose nodes
/// contain the old ones. Throws GridMismatch.
RadonMeasure extend_by_zero(const RadonMeasure& mu, const Grid& larger);

/// Hat-function projection to interior nodes, the discrete H⁻¹ representative.
Field embed_measure(const RadonMeasure& mu);

enum class EnergyRegime { SuperlinearIntegral, SublinearTv };

struct EnergyFunctional {
  Potential potential;
  EnergyRegime regime;

  /// Regime chosen from the growth class of ψ.
  explicit EnergyFunctional(Potential p);
};

/// ∫ψ(h)dx + ψ_∞(1)Σ|mᵢ| (TV regime) or ∫ψ(h)dx, +inf with atoms (integral regime).
double energy(const EnergyFunctional& f, const RadonMeasure& mu);
/// h Σ ψ(uᵢ) in either regime.
double energy(const EnergyFunctional& f, const Field& u);
double energy(const Potential& psi, std::span<const double> u, double h);

/// Partition of unity ζ⁰, ζ¹, ζ² on [a, b] subordinate to U⁰ = (a+m, b−m),
/// U¹ = (a, a+2h*), U² = (b−2h*, b). ζ¹ ≡ 1 on [a, a+m] and is nonincreasing,
/// ζ² is its mirror image.
class BoundaryCover {
 public:
  /// Throws DomainTooSmall if b − a < 4h*, ParamError unless 0 < m < 2h*.
  BoundaryCover(double a, double b, double chart_height = 0.2,
                std::optional<double> interior_margin = {});

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double chart_height() const noexcept { return hstar_; }
  /// dist(U⁰, Oᶜ).
  double interior_margin() const noexcept { return m_; }

  double zeta(int j, double x) const noexcept;
  /// Test-function shift direction of patch j: 0, +1 (left chart), −1.
  static double direction(int j) noexcept { return j == 0 ? 0.0 : (j == 1 ? 1.0 : -1.0); }

  /// w(ε) = min{m, ε/2, h*/4}.
  double margin(double eps) const;

 private:
  double a_, b_, hstar_, m_;
};

/// Boundary margin w(ε) for the default cover of (a, b).
double boundary_margin(double eps, double a, double b, double chart_height = 0.2);

struct ShiftMollifyParams {
  double eps;
  double delta;
  double boundary_margin;
};

/// Parameters with δ = w(ε)/2.
ShiftMollifyParams default_params(const BoundaryCover& cover, double eps);

/// μ_ε, defined by <μ_ε, η> = <μ, η_ε> with η_ε(x) = Σ ζʲ(x) η̄(x − ε eʲ).
RadonMeasure shift_measure(const RadonMeasure& mu, double eps, const BoundaryCover& cover);
RadonMeasure shift_measure(const RadonMeasure& mu, double eps);

/// Bump kernel exp(−1/(1 − (r/δ)²)) on |r| < δ, unnormalized.
double bump(double r, double delta) noexcept;

/// ρ_δ ∗ μ̄ sampled at interior nodes. The kernel is normalized by its lattice
/// sum so that every cell and every atom sheds total weight one over the whole
/// node lattice; mass reaching boundary or exterior nodes is dropped.
Field mollify(const RadonMeasure& mu, double delta);

/// Mollify, then apply the dual shift. ParamError if δ > w(ε)/2.
Field shift_mollify(const RadonMeasure& mu, const ShiftMollifyParams& p, const BoundaryCover& cover);
Field shift_mollify(const RadonMeasure& mu, const ShiftMollifyParams& p);

/// shift_mollify at ε = 1/n, δ = w(1/n)/2.
Field approx_sequence(const RadonMeasure& mu, std::size_t n, const BoundaryCover& cover);
Field approx_sequence(const RadonMeasure& mu, std::size_t n);

/// Test-function side on node fields: η ↦ η_ε and η ↦ ρ_δ ∗ η (lattice
/// normalized kernel, zero outside the interior nodes).
Field shift_field(const Field& eta, double eps, const BoundaryCover& cover);
Field mollify_field(const Field& eta, double delta);

/// Largest node value of the normalized kernel for width δ on spacing h.
double mollifier_peak(double delta, double h) noexcept;

}  // namespace svilab
