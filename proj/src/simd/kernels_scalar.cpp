#include "svilab/simd/kernels.hpp"

#include <cmath>

namespace svilab::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_abs_scalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void stencil_scalar(const double* u, double* out, std::size_t n, double scale) {
  if (n == 0) return;
  if (n == 1) {
    out[0] = scale * (0.0 - 2.0 * u[0] + 0.0);
    return;
  }
  out[0] = scale * (0.0 - 2.0 * u[0] + u[1]);
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = scale * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
  out[n - 1] = scale * (u[n - 2] - 2.0 * u[n - 1] + 0.0);
}

void odd_pwl_scalar(const PwlTable& t, const double* x, double* value, double* deriv,
                    std::size_t n) {
  const std::size_t segs = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ax = std::fabs(x[i]);
    double a = t.slope[0];
    double c = t.intercept[0];
    for (std::size_t k = 1; k < segs; ++k) {
      if (ax >= t.start[k]) {
        a = t.slope[k];
        c = t.intercept[k];
      }
    }
    const double v = a * ax + c;
    value[i] = std::signbit(x[i]) ? -v : v;
    deriv[i] = a;
  }
}

}  // namespace

const KernelSet& scalar_kernels() noexcept {
  static const KernelSet set{"scalar", dot_scalar, sum_abs_scalar, axpy_scalar, stencil_scalar,
                             odd_pwl_scalar};
  return set;
}

}  // namespace svilab::simd
