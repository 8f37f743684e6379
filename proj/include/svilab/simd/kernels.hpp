#pragma once

// Data-parallel inner loops used by the discrete spaces and the SPDE stepper.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant compiled in its own translation unit. The variant is picked once at
// startup from CPUID; SVILAB_SIMD=scalar in the environment forces the
// reference path. Elementwise kernels are bit-identical across variants;
// reductions (dot, sum_abs) differ only by summation order.

#include <cstddef>
#include <span>
#include <vector>

namespace svilab::simd {

/// Odd piecewise-linear map f(x) = sgn(x) * (slope[k]*|x| + intercept[k]) for
/// |x| in [start[k], start[k+1]). start[0] must be 0 and starts increasing.
struct PwlTable {
  std::vector<double> start;
  std::vector<double> slope;
  std::vector<double> intercept;

  std::size_t size() const noexcept { return start.size(); }
};

struct KernelSet {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_abs)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = scale * (u[i-1] - 2 u[i] + u[i+1]) with u[-1] = u[n] = 0
  void (*stencil)(const double* u, double* out, std::size_t n, double scale);
  // value[i] = f(x[i]), deriv[i] = f'(x[i]) (right derivative at segment starts)
  void (*odd_pwl)(const PwlTable& t, const double* x, double* value, double* deriv,
                  std::size_t n);
};

const KernelSet& scalar_kernels() noexcept;
/// nullptr when the running CPU (or the build) has no AVX2.
const KernelSet* avx2_kernels() noexcept;
/// Kernel set selected for this process.
const KernelSet& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum_abs(std::span<const double> a) { return active().sum_abs(a.data(), a.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void stencil(std::span<const double> u, std::span<double> out, double scale) {
  active().stencil(u.data(), out.data(), u.size(), scale);
}
inline void odd_pwl(const PwlTable& t, std::span<const double> x, std::span<double> value,
                    std::span<double> deriv) {
  active().odd_pwl(t, x.data(), value.data(), deriv.data(), x.size());
}

}  // namespace svilab::simd
