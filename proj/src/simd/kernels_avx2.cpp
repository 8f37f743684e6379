#include "svilab/simd/kernels.hpp"

#include <cmath>

#if defined(SVILAB_HAVE_AVX2_TU) && defined(__AVX2__)
#include <immintrin.h>

namespace svilab::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_abs_avx2(const double* a, std::size_t n) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_and_pd(_mm256_loadu_pd(a + i), mask));
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void stencil_avx2(const double* u, double* out, std::size_t n, double scale) {
  if (n < 3) {
    scalar_kernels().stencil(u, out, n, scale);
    return;
  }
  out[0] = scale * (0.0 - 2.0 * u[0] + u[1]);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d vs = _mm256_set1_pd(scale);
  std::size_t i = 1;
  for (; i + 4 <= n - 1; i += 4) {
    const __m256d l = _mm256_loadu_pd(u + i - 1);
    const __m256d m = _mm256_loadu_pd(u + i);
    const __m256d r = _mm256_loadu_pd(u + i + 1);
    const __m256d s = _mm256_add_pd(_mm256_sub_pd(l, _mm256_mul_pd(two, m)), r);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, s));
  }
  for (; i + 1 < n; ++i) out[i] = scale * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
  out[n - 1] = scale * (u[n - 2] - 2.0 * u[n - 1] + 0.0);
}

void odd_pwl_avx2(const PwlTable& t, const double* x, double* value, double* deriv,
                  std::size_t n) {
  const std::size_t segs = t.size();
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d ax = _mm256_andnot_pd(sign, vx);
    __m256d a = _mm256_set1_pd(t.slope[0]);
    __m256d c = _mm256_set1_pd(t.intercept[0]);
    for (std::size_t k = 1; k < segs; ++k) {
      const __m256d m = _mm256_cmp_pd(ax, _mm256_set1_pd(t.start[k]), _CMP_GE_OQ);
      a = _mm256_blendv_pd(a, _mm256_set1_pd(t.slope[k]), m);
      c = _mm256_blendv_pd(c, _mm256_set1_pd(t.intercept[k]), m);
    }
    const __m256d v = _mm256_add_pd(_mm256_mul_pd(a, ax), c);
    _mm256_storeu_pd(value + i, _mm256_xor_pd(v, _mm256_and_pd(sign, vx)));
    _mm256_storeu_pd(deriv + i, a);
  }
  if (i < n) scalar_kernels().odd_pwl(t, x + i, value + i, deriv + i, n - i);
}

}  // namespace

const KernelSet* avx2_kernels() noexcept {
  static const KernelSet set{"avx2", dot_avx2, sum_abs_avx2, axpy_avx2, stencil_avx2,
                             odd_pwl_avx2};
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  return supported ? &set : nullptr;
}

}  // namespace svilab::simd

#else

namespace svilab::simd {
const KernelSet* avx2_kernels() noexcept { return nullptr; }
}  // namespace svilab::simd

#endif
