// AVX-512F variants, same contract as the scalar reference.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace bib::kern::avx512_impl {

double dot(const double* a, const double* b, std::size_t n) {
  __m512d acc0 = _mm512_setzero_pd();
  __m512d acc1 = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), acc0);
    acc1 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 8), _mm512_loadu_pd(b + i + 8), acc1);
  }
  double s = _mm512_reduce_add_pd(_mm512_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m512d va = _mm512_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
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
    __m512d a0 = _mm512_setzero_pd();
    __m512d b0 = _mm512_setzero_pd();
    __m512d c0 = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
      const __m512d r0 = _mm512_loadu_pd(row + i);
      a0 = _mm512_fmadd_pd(r0, _mm512_loadu_pd(x0 + i), a0);
      b0 = _mm512_fmadd_pd(r0, _mm512_loadu_pd(x1 + i), b0);
      c0 = _mm512_fmadd_pd(r0, _mm512_loadu_pd(x2 + i), c0);
    }
    double s0 = _mm512_reduce_add_pd(a0);
    double s1 = _mm512_reduce_add_pd(b0);
    double s2 = _mm512_reduce_add_pd(c0);
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

}  // namespace bib::kern::avx512_impl

#endif  // x86_64
