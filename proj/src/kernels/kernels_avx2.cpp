// AVX2/FMA kernel variants. Built with target attributes so the translation
// unit compiles into a generic binary; the dispatcher never calls these on a
// CPU without AVX2.
#include "milfem/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#define MILFEM_X86 1
#include <immintrin.h>
#else
#define MILFEM_X86 0
#endif

namespace milfem::kernels::detail {

#if MILFEM_X86

#define MILFEM_AVX2_TARGET __attribute__((target("avx2,fma")))

MILFEM_AVX2_TARGET
static inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

MILFEM_AVX2_TARGET
void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

MILFEM_AVX2_TARGET
double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

MILFEM_AVX2_TARGET
double sumsq_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    const __m256d v1 = _mm256_loadu_pd(x + i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

MILFEM_AVX2_TARGET
void modal_superpose_avx2(double* out, const double* table, const double* w,
                          std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = table + i * m;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 8 <= m; j += 8) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + j),
                             _mm256_loadu_pd(w + j), acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row + j + 4),
                             _mm256_loadu_pd(w + j + 4), acc1);
    }
    for (; j + 4 <= m; j += 4)
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + j),
                             _mm256_loadu_pd(w + j), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; j < m; ++j) s += row[j] * w[j];
    out[i] = s;
  }
}

MILFEM_AVX2_TARGET
void rowwise_quad_form_avx2(double* out, const double* phi, const double* L,
                            std::size_t n, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = phi + i * m;
    double acc = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      const double* Lrow = L + a * m;
      __m256d v0 = _mm256_setzero_pd();
      __m256d v1 = _mm256_setzero_pd();
      std::size_t b = 0;
      for (; b + 8 <= m; b += 8) {
        v0 = _mm256_fmadd_pd(_mm256_loadu_pd(Lrow + b),
                             _mm256_loadu_pd(p + b), v0);
        v1 = _mm256_fmadd_pd(_mm256_loadu_pd(Lrow + b + 4),
                             _mm256_loadu_pd(p + b + 4), v1);
      }
      for (; b + 4 <= m; b += 4)
        v0 = _mm256_fmadd_pd(_mm256_loadu_pd(Lrow + b),
                             _mm256_loadu_pd(p + b), v0);
      double inner = hsum(_mm256_add_pd(v0, v1));
      for (; b < m; ++b) inner += Lrow[b] * p[b];
      acc += p[a] * inner;
    }
    out[i] = acc;
  }
}

MILFEM_AVX2_TARGET
void antisym_rank2_accumulate_avx2(double* A, const double* u, const double* v,
                                   double w, std::size_t m) {
  for (std::size_t a = 0; a < m; ++a) {
    const __m256d wu = _mm256_set1_pd(w * u[a]);
    const __m256d wv = _mm256_set1_pd(w * v[a]);
    double* row = A + a * m;
    std::size_t b = 0;
    for (; b + 4 <= m; b += 4) {
      __m256d r = _mm256_loadu_pd(row + b);
      r = _mm256_fmadd_pd(wu, _mm256_loadu_pd(v + b), r);
      r = _mm256_fnmadd_pd(wv, _mm256_loadu_pd(u + b), r);
      _mm256_storeu_pd(row + b, r);
    }
    const double su = w * u[a];
    const double sv = w * v[a];
    for (; b < m; ++b) row[b] += su * v[b] - sv * u[b];
  }
}

#else // !MILFEM_X86: forward to the scalar reference.

void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
  axpy_scalar(y, a, x, n);
}
double dot_avx2(const double* x, const double* y, std::size_t n) {
  return dot_scalar(x, y, n);
}
double sumsq_avx2(const double* x, std::size_t n) { return sumsq_scalar(x, n); }
void modal_superpose_avx2(double* out, const double* table, const double* w,
                          std::size_t n, std::size_t m) {
  modal_superpose_scalar(out, table, w, n, m);
}
void rowwise_quad_form_avx2(double* out, const double* phi, const double* L,
                            std::size_t n, std::size_t m) {
  rowwise_quad_form_scalar(out, phi, L, n, m);
}
void antisym_rank2_accumulate_avx2(double* A, const double* u, const double* v,
                                   double w, std::size_t m) {
  antisym_rank2_accumulate_scalar(A, u, v, w, m);
}

#endif

} // namespace milfem::kernels::detail
