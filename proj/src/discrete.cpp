#include "svilab/discrete.hpp"

#include <cmath>
#include <numbers>

#include "svilab/error.hpp"
#include "svilab/simd/kernels.hpp"

namespace svilab {

Grid::Grid(double a, double b, std::size_t cells) : a_(a), b_(b), cells_(cells) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
    throw ParamError("grid: need finite a < b");
  if (cells < 4) throw ParamError("grid: need at least 4 cells");
  h_ = (b - a) / static_cast<double>(cells);
}

Field::Field(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
  if (values.size() != g.size()) throw GridMismatch("field: value count does not match grid");
}

Field Field::sample(const Grid& g, const std::function<double(double)>& f) {
  Field u(g);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = f(g.node(i));
  return u;
}

Field& Field::operator+=(const Field& o) {
  require_same_grid(grid, o.grid, "field +=");
  for (std::size_t i = 0; i < size(); ++i) values[i] += o.values[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_grid(grid, o.grid, "field -=");
  for (std::size_t i = 0; i < size(); ++i) values[i] -= o.values[i];
  return *this;
}

Field& Field::operator*=(double s) noexcept {
  for (double& v : values) v *= s;
  return *this;
}

Field operator+(Field x, const Field& y) { return x += y; }
Field operator-(Field x, const Field& y) { return x -= y; }
Field operator*(double s, Field x) { return x *= s; }

void require_same_grid(const Grid& x, const Grid& y, const char* what) {
  if (!(x == y)) throw GridMismatch(std::string(what) + ": grids differ");
}

void solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                       std::span<const double> sup, std::span<double> rhs,
                       std::vector<double>& work) {
  const std::size_t n = diag.size();
  if (n == 0) return;
  work.resize(n);
  double den = diag[0];
  work[0] = sup[0] / den;
  rhs[0] = rhs[0] / den;
  for (std::size_t i = 1; i < n; ++i) {
    den = diag[i] - sub[i] * work[i - 1];
    work[i] = i + 1 < n ? sup[i] / den : 0.0;
    rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / den;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= work[i] * rhs[i + 1];
}

DirichletLaplacian::DirichletLaplacian(const Grid& g) : grid_(g) {
  const std::size_t n = g.size();
  cp_.resize(n);
  inv_den_.resize(n);
  double den = 2.0;
  inv_den_[0] = 1.0 / den;
  cp_[0] = -1.0 / den;
  for (std::size_t i = 1; i < n; ++i) {
    den = 2.0 + cp_[i - 1];
    inv_den_[i] = 1.0 / den;
    cp_[i] = -1.0 / den;
  }
}

void DirichletLaplacian::apply(std::span<const double> u, std::span<double> out) const {
  if (u.size() != grid_.size() || out.size() != grid_.size())
    throw GridMismatch("laplacian: size mismatch");
  const double h = grid_.spacing();
  simd::stencil(u, out, 1.0 / (h * h));
}

void DirichletLaplacian::solve_negative(std::span<const double> f, std::span<double> out) const {
  const std::size_t n = grid_.size();
  if (f.size() != n || out.size() != n) throw GridMismatch("inverse laplacian: size mismatch");
  const double h2 = grid_.spacing() * grid_.spacing();
  out[0] = h2 * f[0] * inv_den_[0];
  for (std::size_t i = 1; i < n; ++i) out[i] = (h2 * f[i] + out[i - 1]) * inv_den_[i];
  for (std::size_t i = n - 1; i-- > 0;) out[i] -= cp_[i] * out[i + 1];
}

Field DirichletLaplacian::apply(const Field& u) const {
  require_same_grid(grid_, u.grid, "laplacian_apply");
  Field out(grid_);
  apply(u.span(), out.span());
  return out;
}

Field DirichletLaplacian::inverse(const Field& f) const {
  require_same_grid(grid_, f.grid, "inv_laplacian");
  Field out(grid_);
  solve_negative(f.span(), out.span());
  out *= -1.0;
  return out;
}

double DirichletLaplacian::eigenvalue(std::size_t k) const noexcept {
  const double h = grid_.spacing();
  const double s =
      std::sin(static_cast<double>(k) * std::numbers::pi / (2.0 * static_cast<double>(grid_.cells())));
  return 4.0 / (h * h) * s * s;
}

Field laplacian_apply(const DirichletLaplacian& L, const Field& u) { return L.apply(u); }
Field inv_laplacian(const DirichletLaplacian& L, const Field& f) { return L.inverse(f); }

double l2_inner(const Field& u, const Field& v) {
  require_same_grid(u.grid, v.grid, "l2_inner");
  return u.grid.spacing() * simd::dot(u.span(), v.span());
}

double l2_norm(const Field& u) { return std::sqrt(u.grid.spacing() * simd::dot(u.span(), u.span())); }

double h10_norm_sq(std::span<const double> u, double h) {
  const std::size_t n = u.size();
  if (n == 0) return 0.0;
  double s = u[0] * u[0] + u[n - 1] * u[n - 1];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = u[i + 1] - u[i];
    s += d * d;
  }
  return s / h;
}

double h10_norm(const Field& u) { return std::sqrt(h10_norm_sq(u.span(), u.grid.spacing())); }

double hminus1_inner(const DirichletLaplacian& L, const Field& u, const Field& v) {
  require_same_grid(L.grid(), u.grid, "hminus1_inner");
  require_same_grid(L.grid(), v.grid, "hminus1_inner");
  std::vector<double> w(v.size());
  L.solve_negative(v.span(), w);
  return u.grid.spacing() * simd::dot(u.span(), w);
}

double hminus1_inner(const Field& u, const Field& v) {
  return hminus1_inner(DirichletLaplacian(u.grid), u, v);
}

double hminus1_norm(const DirichletLaplacian& L, const Field& u) {
  return std::sqrt(std::max(0.0, hminus1_inner(L, u, u)));
}

double hminus1_norm(const Field& u) { return hminus1_norm(DirichletLaplacian(u.grid), u); }

Field sine_mode(const Grid& g, std::size_t k) {
  if (k < 1 || k >= g.cells())
    throw ModeOutOfRange("sine_mode: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(g.cells() - 1) + "]");
  const double hk = std::sin(static_cast<double>(k) * std::numbers::pi /
                             (2.0 * static_cast<double>(g.cells())));
  const double lambda = 4.0 / (g.spacing() * g.spacing()) * hk * hk;
  const double scale = std::sqrt(2.0 * lambda / g.length());
  Field u(g);
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = scale * std::sin(static_cast<double>(k) * std::numbers::pi *
                            static_cast<double>(i + 1) / static_cast<double>(g.cells()));
  return u;
}

double discrete_poincare_constant(const Grid& g) {
  return 1.0 / std::sqrt(DirichletLaplacian(g).eigenvalue(1));
}

}  // namespace svilab
