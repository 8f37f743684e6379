#pragma once

// Scalar convex analysis for symmetric potentials: the potential psi, its
// subdifferential phi, the resolvent / Yosida / Moreau regularizations, the
// convex conjugate and the recession function.
//
// A potential is stored on [0, inf) as finitely many polynomial pieces split
// at positive breakpoints and extended to the negative axis by symmetry.
// Kinks live exactly at breakpoints (and possibly at 0), so one-sided
// derivatives of the pieces give the subdifferential without numerical
// differentiation.

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svilab/simd/kernels.hpp"

namespace svilab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class PotentialKind { Psi1, Psi2, Quadratic, Custom };
enum class GrowthClass { Sublinear, Superlinear };

const char* to_string(PotentialKind k) noexcept;
const char* to_string(GrowthClass g) noexcept;

/// Dense polynomial c[0] + c[1] x + c[2] x^2 + ...
struct Polynomial {
  std::vector<double> coeffs;

  double operator()(double x) const noexcept;
  double derivative(double x) const noexcept;
  double second_derivative(double x) const noexcept;
  int degree() const noexcept;
};

/// Closed interval [lower, upper]; a point wherever psi is differentiable.
struct SubdiffInterval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double v, double slack = 0.0) const noexcept {
    return v >= lower - slack && v <= upper + slack;
  }
  /// min{|eta| : eta in the interval}
  double min_abs() const noexcept;
};

class Potential {
 public:
  static Potential psi1();
  static Potential psi2();
  static Potential quadratic();
  /// Validates ψ(0)=0, continuity, convexity, at most quadratic growth and the
  /// witness condition for sublinear potentials. Throws ParamError.
  static Potential custom(std::vector<double> breakpoints, std::vector<Polynomial> pieces,
                          double growth_constant, std::optional<double> witness_y = {});

  PotentialKind kind() const noexcept { return kind_; }
  GrowthClass growth_class() const noexcept { return growth_; }
  const std::vector<double>& breakpoints() const noexcept { return breaks_; }
  const std::vector<Polynomial>& pieces() const noexcept { return pieces_; }
  /// y > 0 with ψ(y) > 0; always set for sublinear potentials.
  std::optional<double> witness_y() const noexcept { return witness_; }
  /// Declared C with inf{|η|² : η ∈ φ(r)} ≤ C (1 + r²).
  double growth_constant() const noexcept { return growth_constant_; }
  /// Integrability exponent m of the superlinear case. The unbounded piece
  /// is at most quadratic, so a superlinear potential always has m = 1.
  std::optional<double> exponent_m() const noexcept;
  /// Every piece has degree ≤ 2, so φ is piecewise linear and the resolvent
  /// has a closed form.
  bool piecewise_quadratic() const noexcept;

  double value(double x) const noexcept;
  SubdiffInterval subdiff(double x) const noexcept;
  /// ψ''(x) on the piece containing |x| (right-sided at breakpoints).
  double curvature(double x) const noexcept;
  /// ψ_∞(1) = lim ψ(t)/t, +inf for superlinear potentials.
  double recession_slope() const noexcept { return recession_slope_; }

 private:
  Potential() = default;
  void finalize();
  std::size_t piece_index(double ax) const noexcept;

  PotentialKind kind_ = PotentialKind::Custom;
  GrowthClass growth_ = GrowthClass::Sublinear;
  std::vector<double> breaks_;
  std::vector<Polynomial> pieces_;
  std::optional<double> witness_;
  double growth_constant_ = 1.0;
  double recession_slope_ = 0.0;
};

/// ψ together with a Yosida parameter ε > 0.
class RegularizedPotential {
 public:
  RegularizedPotential(Potential base, double epsilon);

  const Potential& base() const noexcept { return base_; }
  double epsilon() const noexcept { return eps_; }

  /// Odd piecewise-linear tables of the resolvent and of φ^ε; present only for
  /// piecewise-quadratic potentials.
  const std::optional<simd::PwlTable>& resolvent_table() const noexcept { return resolvent_; }
  const std::optional<simd::PwlTable>& yosida_table() const noexcept { return yosida_; }

  /// Vectorized φ^ε and its derivative over a whole field.
  void apply_yosida(std::span<const double> x, std::span<double> phi,
                    std::span<double> dphi) const;

 private:
  Potential base_;
  double eps_;
  std::optional<simd::PwlTable> resolvent_;
  std::optional<simd::PwlTable> yosida_;
};

double eval_psi(const Potential& p, double x) noexcept;
SubdiffInterval eval_phi(const Potential& p, double x) noexcept;

/// (I + εφ)^{-1}(x). Closed form for piecewise-quadratic potentials, monotone
/// bisection otherwise (ConvergenceFailure if the bracket does not shrink).
double resolvent(const RegularizedPotential& rp, double x);
/// Same map, always by bisection to absolute tolerance 1e-12.
double resolvent_bisection(const RegularizedPotential& rp, double x);
double yosida_phi_eps(const RegularizedPotential& rp, double x);
/// Derivative of φ^ε (right derivative at the finitely many corners).
double yosida_derivative(const RegularizedPotential& rp, double x);
double moreau_psi_eps(const RegularizedPotential& rp, double x);

/// sup_y (x y - ψ(y)), possibly +inf.
double conjugate(const Potential& p, double x);
/// lim_{t→∞} ψ(t x)/t, possibly +inf.
double recession(const Potential& p, double x) noexcept;
/// Indicator of [-ψ_∞(1), ψ_∞(1)]. GrowthClassError for superlinear ψ.
double recession_conjugate(const Potential& p, double x);

std::string potential_to_json(const Potential& p);
/// Accepts the JSON record written by potential_to_json, or a bare builtin
/// name ("psi1", "psi2", "quadratic"). Throws ParamError.
Potential potential_from_json(const std::string& text);
Potential potential_by_name(const std::string& name);

}  // namespace svilab
