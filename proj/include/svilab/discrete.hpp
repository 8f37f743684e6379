#pragma once

// Uniform 1D grids with homogeneous Dirichlet boundary and the discrete
// L², H¹₀, H⁻¹ geometry built on the second-difference Laplacian.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace svilab {

class Grid {
 public:
  /// (a, b) split into `cells` ≥ 4 equal cells. Throws ParamError.
  Grid(double a, double b, std::size_t cells);

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  double length() const noexcept { return b_ - a_; }
  std::size_t cells() const noexcept { return cells_; }
  double spacing() const noexcept { return h_; }
  /// Number of interior nodes, cells − 1.
  std::size_t size() const noexcept { return cells_ - 1; }
  /// Coordinate of interior node i (0-based), a + (i+1) h.
  double node(std::size_t i) const noexcept { return a_ + static_cast<double>(i + 1) * h_; }

  friend bool operator==(const Grid& x, const Grid& y) noexcept {
    return x.a_ == y.a_ && x.b_ == y.b_ && x.cells_ == y.cells_;
  }

 private:
  double a_, b_;
  std::size_t cells_;
  double h_;
};

/// Values on the interior nodes; boundary values are implicitly zero.
struct Field {
  Grid grid;
  std::vector<double> values;

  explicit Field(const Grid& g) : grid(g), values(g.size(), 0.0) {}
  Field(const Grid& g, std::vector<double> v);

  static Field sample(const Grid& g, const std::function<double(double)>& f);

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) noexcept { return values[i]; }
  double operator[](std::size_t i) const noexcept { return values[i]; }
  std::span<const double> span() const noexcept { return values; }
  std::span<double> span() noexcept { return values; }

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double s) noexcept;
};

Field operator+(Field x, const Field& y);
Field operator-(Field x, const Field& y);
Field operator*(double s, Field x);

/// Throws GridMismatch unless the grids agree exactly.
void require_same_grid(const Grid& x, const Grid& y, const char* what);

/// Solves a tridiagonal system in place of `rhs` (Thomas algorithm, no
/// pivoting; intended for diagonally dominant matrices). `sub[0]` and
/// `sup[n-1]` are ignored; `work` is resized to n.
void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> sup, std::span<double> rhs,
                       std::vector<double>& work);

/// L = h⁻² tridiag(1, −2, 1) with a cached factorization of −L.
class DirichletLaplacian {
 public:
  explicit DirichletLaplacian(const Grid& g);

  const Grid& grid() const noexcept { return grid_; }

  void apply(std::span<const double> u, std::span<double> out) const;
  /// out = (−L)⁻¹ f. `out` may alias `f`.
  void solve_negative(std::span<const double> f, std::span<double> out) const;

  Field apply(const Field& u) const;
  /// L⁻¹ f.
  Field inverse(const Field& f) const;

  /// k-th eigenvalue of −L, (4/h²) sin²(kπ/(2N)).
  double eigenvalue(std::size_t k) const noexcept;

 private:
  Grid grid_;
  // −L scaled by h²: tridiag(−1, 2, −1); cp are the modified superdiagonal
  // entries, inv_den the reciprocal pivots.
  std::vector<double> cp_;
  std::vector<double> inv_den_;
};

Field laplacian_apply(const DirichletLaplacian& L, const Field& u);
Field inv_laplacian(const DirichletLaplacian& L, const Field& f);

double l2_inner(const Field& u, const Field& v);
double l2_norm(const Field& u);
/// Forward-difference gradient norm including the two boundary differences.
double h10_norm(const Field& u);
double h10_norm_sq(std::span<const double> u, double h);

/// h Σ uᵢ ((−L)⁻¹ v)ᵢ.
double hminus1_inner(const DirichletLaplacian& L, const Field& u, const Field& v);
double hminus1_inner(const Field& u, const Field& v);
double hminus1_norm(const DirichletLaplacian& L, const Field& u);
double hminus1_norm(const Field& u);

/// sin(kπ(x−a)/(b−a)) scaled to unit H⁻¹ norm, 1 ≤ k ≤ N−1.
/// Throws ModeOutOfRange.
Field sine_mode(const Grid& g, std::size_t k);

/// Smallest constant with ‖u‖ ≤ c ‖∇u‖ on the grid, 1/sqrt(λ₁).
double discrete_poincare_constant(const Grid& g);

}  // namespace svilab
