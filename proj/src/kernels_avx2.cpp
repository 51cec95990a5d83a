// AVX2+FMA variants. Compiled with -mavx2 -mfma in this translation unit only;
// callers reach them through the dispatch table after a CPUID check.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace bib::kern::avx2_impl {

namespace {

inline double hsum(__m256d v) {
  double lane[4];
  _mm256_storeu_pd(lane, v);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* a, std::size_t m, std::size_t n, const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) y[r] = dot(a + r * n, x, n);
}

void matvec3(const double* a, std::size_t m, std::size_t n, const double* x0, const double* x1,
             const double* x2, double* y0, double* y1, double* y2) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = a + r * n;
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    __m256d b0 = _mm256_setzero_pd(), b1 = _mm256_setzero_pd();
    __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
      const __m256d r0 = _mm256_loadu_pd(row + i);
      const __m256d r1 = _mm256_loadu_pd(row + i + 4);
      a0 = _mm256_fmadd_pd(r0, _mm256_loadu_pd(x0 + i), a0);
      a1 = _mm256_fmadd_pd(r1, _mm256_loadu_pd(x0 + i + 4), a1);
      b0 = _mm256_fmadd_pd(r0, _mm256_loadu_pd(x1 + i), b0);
      b1 = _mm256_fmadd_pd(r1, _mm256_loadu_pd(x1 + i + 4), b1);
      c0 = _mm256_fmadd_pd(r0, _mm256_loadu_pd(x2 + i), c0);
      c1 = _mm256_fmadd_pd(r1, _mm256_loadu_pd(x2 + i + 4), c1);
    }
    double s0 = hsum(_mm256_add_pd(a0, a1));
    double s1 = hsum(_mm256_add_pd(b0, b1));
    double s2 = hsum(_mm256_add_pd(c0, c1));
    for (; i < n; ++i) {
      const double v = row[i];
      s0 += v * x0[i];
      s1 += v * x1[i];
      s2 += v * x2[i];
    }
    y0[r] = s0;
    y1[r] = s1;
    y2[r] = s2;
  }
}

}  // namespace bib::kern::avx2_impl

#endif  // x86_64
