// AVX2+FMA kernel backend. Compiled with -mavx2 -mfma in this TU only;
// nothing here runs unless the dispatcher picked this table at runtime.
//
// Accumulation order per output element matches the scalar table (k
// ascending), so results differ from scalar only by FMA rounding.

#include <immintrin.h>

#include "hetnet/kernels_exp.hpp"
#include "hetnet/kernels_table.hpp"

namespace hetnet::kern {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

void axpy_avx2(int64_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, y0);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(int64_t n, double a, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] *= a;
}

void vadd_avx2(int64_t n, const double* x, const double* y, double* out) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void vsub_avx2(int64_t n, const double* x, const double* y, double* out) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void vmul_avx2(int64_t n, const double* x, const double* y, double* out) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void vshift_avx2(int64_t n, const double* x, double c, double* out) {
  const __m256d vc = _mm256_set1_pd(c);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), vc));
  }
  for (; i < n; ++i) out[i] = x[i] + c;
}

// Vector port of exp_ref: same range reduction, same rational approximation,
// same two-factor 2^n scaling, so lanes agree with the scalar path up to FMA
// rounding. Out-of-range lanes are patched with blends at the end.
inline __m256d exp4(__m256d x) {
  using E = ExpConsts;
  const __m256d max_arg = _mm256_set1_pd(E::kMaxArg);
  const __m256d min_arg = _mm256_set1_pd(E::kMinArg);
  const __m256d hi_mask = _mm256_cmp_pd(x, max_arg, _CMP_GT_OQ);
  const __m256d lo_mask = _mm256_cmp_pd(x, min_arg, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, min_arg), max_arg);

  __m256d pn = _mm256_floor_pd(
      _mm256_fmadd_pd(_mm256_set1_pd(E::kLog2E), x, _mm256_set1_pd(0.5)));
  x = _mm256_fnmadd_pd(pn, _mm256_set1_pd(E::kC1), x);
  x = _mm256_fnmadd_pd(pn, _mm256_set1_pd(E::kC2), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(E::kP0), xx, _mm256_set1_pd(E::kP1));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(E::kP2));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(E::kQ0), xx, _mm256_set1_pd(E::kQ1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(E::kQ2));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(E::kQ3));
  const __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  const __m256d r =
      _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // n1 = trunc(n/2), n2 = n - n1, matching the integer division in exp_ref.
  const __m256d n1d = _mm256_round_pd(_mm256_mul_pd(pn, _mm256_set1_pd(0.5)),
                                      _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
  const __m256d n2d = _mm256_sub_pd(pn, n1d);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256i n1 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n1d));
  const __m256i n2 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n2d));
  const __m256d f1 =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(n1, bias), 52));
  const __m256d f2 =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(n2, bias), 52));

  __m256d out = _mm256_mul_pd(_mm256_mul_pd(r, f1), f2);
  out = _mm256_blendv_pd(out, _mm256_setzero_pd(), lo_mask);
  out = _mm256_blendv_pd(out, _mm256_set1_pd(1.0 / 0.0), hi_mask);
  return out;
}

void vexp_avx2(int64_t n, const double* x, double* out) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = exp_ref(x[i]);
}

double dot_avx2(int64_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_avx2(int64_t n, const double* x) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double vmax_avx2(int64_t n, const double* x) {
  if (n <= 0) return -1.0 / 0.0;
  double m = x[0];
  int64_t i = 1;
  if (n >= 5) {
    __m256d vm = _mm256_loadu_pd(x + 1);
    i = 5;
    for (; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    __m128d lo = _mm_max_pd(_mm256_castpd256_pd128(vm), _mm256_extractf128_pd(vm, 1));
    lo = _mm_max_sd(lo, _mm_unpackhi_pd(lo, lo));
    const double lane = _mm_cvtsd_f64(lo);
    if (lane > m) m = lane;
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

void relu_fwd_avx2(int64_t n, const double* x, double* y) {
  const __m256d zero = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_avx2(int64_t n, const double* x, const double* dy, double* dx) {
  const __m256d zero = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), g));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

// ---- GEMM micro-kernels ----------------------------------------------------

// C[m,n] (+)= sum_k A[m,k]*B[k,n] for rows [m0,m1). 4-row x 8-column register
// tile, B rows streamed once per k, A broadcast per row.
void gemm_nn_avx2(int64_t m0, int64_t m1, int64_t K, int64_t N, const double* A,
                  int64_t lda, const double* B, int64_t ldb, double* C, int64_t ldc,
                  bool acc) {
  int64_t m = m0;
  for (; m + 4 <= m1; m += 4) {
    const double* a0 = A + m * lda;
    const double* a1 = a0 + lda;
    const double* a2 = a1 + lda;
    const double* a3 = a2 + lda;
    double* c0 = C + m * ldc;
    double* c1 = c0 + ldc;
    double* c2 = c1 + ldc;
    double* c3 = c2 + ldc;
    int64_t n = 0;
    for (; n + 8 <= N; n += 8) {
      __m256d acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
      if (acc) {
        acc00 = _mm256_loadu_pd(c0 + n);
        acc01 = _mm256_loadu_pd(c0 + n + 4);
        acc10 = _mm256_loadu_pd(c1 + n);
        acc11 = _mm256_loadu_pd(c1 + n + 4);
        acc20 = _mm256_loadu_pd(c2 + n);
        acc21 = _mm256_loadu_pd(c2 + n + 4);
        acc30 = _mm256_loadu_pd(c3 + n);
        acc31 = _mm256_loadu_pd(c3 + n + 4);
      } else {
        acc00 = acc01 = acc10 = acc11 = _mm256_setzero_pd();
        acc20 = acc21 = acc30 = acc31 = _mm256_setzero_pd();
      }
      for (int64_t k = 0; k < K; ++k) {
        const __m256d b0 = _mm256_loadu_pd(B + k * ldb + n);
        const __m256d b1 = _mm256_loadu_pd(B + k * ldb + n + 4);
        const __m256d va0 = _mm256_broadcast_sd(a0 + k);
        acc00 = _mm256_fmadd_pd(va0, b0, acc00);
        acc01 = _mm256_fmadd_pd(va0, b1, acc01);
        const __m256d va1 = _mm256_broadcast_sd(a1 + k);
        acc10 = _mm256_fmadd_pd(va1, b0, acc10);
        acc11 = _mm256_fmadd_pd(va1, b1, acc11);
        const __m256d va2 = _mm256_broadcast_sd(a2 + k);
        acc20 = _mm256_fmadd_pd(va2, b0, acc20);
        acc21 = _mm256_fmadd_pd(va2, b1, acc21);
        const __m256d va3 = _mm256_broadcast_sd(a3 + k);
        acc30 = _mm256_fmadd_pd(va3, b0, acc30);
        acc31 = _mm256_fmadd_pd(va3, b1, acc31);
      }
      _mm256_storeu_pd(c0 + n, acc00);
      _mm256_storeu_pd(c0 + n + 4, acc01);
      _mm256_storeu_pd(c1 + n, acc10);
      _mm256_storeu_pd(c1 + n + 4, acc11);
      _mm256_storeu_pd(c2 + n, acc20);
      _mm256_storeu_pd(c2 + n + 4, acc21);
      _mm256_storeu_pd(c3 + n, acc30);
      _mm256_storeu_pd(c3 + n + 4, acc31);
    }
    for (; n + 4 <= N; n += 4) {
      __m256d v0 = acc ? _mm256_loadu_pd(c0 + n) : _mm256_setzero_pd();
      __m256d v1 = acc ? _mm256_loadu_pd(c1 + n) : _mm256_setzero_pd();
      __m256d v2 = acc ? _mm256_loadu_pd(c2 + n) : _mm256_setzero_pd();
      __m256d v3 = acc ? _mm256_loadu_pd(c3 + n) : _mm256_setzero_pd();
      for (int64_t k = 0; k < K; ++k) {
        const __m256d b0 = _mm256_loadu_pd(B + k * ldb + n);
        v0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a0 + k), b0, v0);
        v1 = _mm256_fmadd_pd(_mm256_broadcast_sd(a1 + k), b0, v1);
        v2 = _mm256_fmadd_pd(_mm256_broadcast_sd(a2 + k), b0, v2);
        v3 = _mm256_fmadd_pd(_mm256_broadcast_sd(a3 + k), b0, v3);
      }
      _mm256_storeu_pd(c0 + n, v0);
      _mm256_storeu_pd(c1 + n, v1);
      _mm256_storeu_pd(c2 + n, v2);
      _mm256_storeu_pd(c3 + n, v3);
    }
    for (; n < N; ++n) {
      double s0 = acc ? c0[n] : 0.0;
      double s1 = acc ? c1[n] : 0.0;
      double s2 = acc ? c2[n] : 0.0;
      double s3 = acc ? c3[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) {
        const double b = B[k * ldb + n];
        s0 += a0[k] * b;
        s1 += a1[k] * b;
        s2 += a2[k] * b;
        s3 += a3[k] * b;
      }
      c0[n] = s0;
      c1[n] = s1;
      c2[n] = s2;
      c3[n] = s3;
    }
  }
  for (; m < m1; ++m) {
    const double* a0 = A + m * lda;
    double* c0 = C + m * ldc;
    int64_t n = 0;
    for (; n + 8 <= N; n += 8) {
      __m256d v0 = acc ? _mm256_loadu_pd(c0 + n) : _mm256_setzero_pd();
      __m256d v1 = acc ? _mm256_loadu_pd(c0 + n + 4) : _mm256_setzero_pd();
      for (int64_t k = 0; k < K; ++k) {
        const __m256d va = _mm256_broadcast_sd(a0 + k);
        v0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(B + k * ldb + n), v0);
        v1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(B + k * ldb + n + 4), v1);
      }
      _mm256_storeu_pd(c0 + n, v0);
      _mm256_storeu_pd(c0 + n + 4, v1);
    }
    for (; n + 4 <= N; n += 4) {
      __m256d v0 = acc ? _mm256_loadu_pd(c0 + n) : _mm256_setzero_pd();
      for (int64_t k = 0; k < K; ++k) {
        v0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a0 + k), _mm256_loadu_pd(B + k * ldb + n), v0);
      }
      _mm256_storeu_pd(c0 + n, v0);
    }
    for (; n < N; ++n) {
      double s = acc ? c0[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) s += a0[k] * B[k * ldb + n];
      c0[n] = s;
    }
  }
}

// C[m,n] (+)= sum_k A[m,k]*B[n,k] for rows [m0,m1). Both operands are
// k-contiguous, so the k loop vectorizes into lane-parallel dots; 2x4 tile.
void gemm_nt_avx2(int64_t m0, int64_t m1, int64_t K, int64_t N, const double* A,
                  int64_t lda, const double* B, int64_t ldb, double* C, int64_t ldc,
                  bool acc) {
  int64_t m = m0;
  for (; m + 2 <= m1; m += 2) {
    const double* a0 = A + m * lda;
    const double* a1 = a0 + lda;
    double* c0 = C + m * ldc;
    double* c1 = c0 + ldc;
    int64_t n = 0;
    for (; n + 4 <= N; n += 4) {
      const double* b0 = B + n * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      __m256d v00 = _mm256_setzero_pd(), v01 = _mm256_setzero_pd();
      __m256d v02 = _mm256_setzero_pd(), v03 = _mm256_setzero_pd();
      __m256d v10 = _mm256_setzero_pd(), v11 = _mm256_setzero_pd();
      __m256d v12 = _mm256_setzero_pd(), v13 = _mm256_setzero_pd();
      int64_t k = 0;
      for (; k + 4 <= K; k += 4) {
        const __m256d va0 = _mm256_loadu_pd(a0 + k);
        const __m256d va1 = _mm256_loadu_pd(a1 + k);
        const __m256d vb0 = _mm256_loadu_pd(b0 + k);
        const __m256d vb1 = _mm256_loadu_pd(b1 + k);
        const __m256d vb2 = _mm256_loadu_pd(b2 + k);
        const __m256d vb3 = _mm256_loadu_pd(b3 + k);
        v00 = _mm256_fmadd_pd(va0, vb0, v00);
        v01 = _mm256_fmadd_pd(va0, vb1, v01);
        v02 = _mm256_fmadd_pd(va0, vb2, v02);
        v03 = _mm256_fmadd_pd(va0, vb3, v03);
        v10 = _mm256_fmadd_pd(va1, vb0, v10);
        v11 = _mm256_fmadd_pd(va1, vb1, v11);
        v12 = _mm256_fmadd_pd(va1, vb2, v12);
        v13 = _mm256_fmadd_pd(va1, vb3, v13);
      }
      double s00 = hsum(v00), s01 = hsum(v01), s02 = hsum(v02), s03 = hsum(v03);
      double s10 = hsum(v10), s11 = hsum(v11), s12 = hsum(v12), s13 = hsum(v13);
      for (; k < K; ++k) {
        s00 += a0[k] * b0[k];
        s01 += a0[k] * b1[k];
        s02 += a0[k] * b2[k];
        s03 += a0[k] * b3[k];
        s10 += a1[k] * b0[k];
        s11 += a1[k] * b1[k];
        s12 += a1[k] * b2[k];
        s13 += a1[k] * b3[k];
      }
      if (acc) {
        c0[n] += s00;
        c0[n + 1] += s01;
        c0[n + 2] += s02;
        c0[n + 3] += s03;
        c1[n] += s10;
        c1[n + 1] += s11;
        c1[n + 2] += s12;
        c1[n + 3] += s13;
      } else {
        c0[n] = s00;
        c0[n + 1] = s01;
        c0[n + 2] = s02;
        c0[n + 3] = s03;
        c1[n] = s10;
        c1[n + 1] = s11;
        c1[n + 2] = s12;
        c1[n + 3] = s13;
      }
    }
    for (; n < N; ++n) {
      const double s0 = dot_avx2(K, a0, B + n * ldb);
      const double s1 = dot_avx2(K, a1, B + n * ldb);
      if (acc) {
        c0[n] += s0;
        c1[n] += s1;
      } else {
        c0[n] = s0;
        c1[n] = s1;
      }
    }
  }
  for (; m < m1; ++m) {
    const double* a0 = A + m * lda;
    double* c0 = C + m * ldc;
    for (int64_t n = 0; n < N; ++n) {
      const double s = dot_avx2(K, a0, B + n * ldb);
      c0[n] = acc ? c0[n] + s : s;
    }
  }
}

// C[m,n] (+)= sum_k A[k,m]*B[k,n] for rows [m0,m1). Same shape as the nn
// kernel but A is walked down a column (stride lda).
void gemm_tn_avx2(int64_t m0, int64_t m1, int64_t K, int64_t N, const double* A,
                  int64_t lda, const double* B, int64_t ldb, double* C, int64_t ldc,
                  bool acc) {
  int64_t m = m0;
  for (; m + 4 <= m1; m += 4) {
    double* c0 = C + m * ldc;
    double* c1 = c0 + ldc;
    double* c2 = c1 + ldc;
    double* c3 = c2 + ldc;
    int64_t n = 0;
    for (; n + 4 <= N; n += 4) {
      __m256d v0 = acc ? _mm256_loadu_pd(c0 + n) : _mm256_setzero_pd();
      __m256d v1 = acc ? _mm256_loadu_pd(c1 + n) : _mm256_setzero_pd();
      __m256d v2 = acc ? _mm256_loadu_pd(c2 + n) : _mm256_setzero_pd();
      __m256d v3 = acc ? _mm256_loadu_pd(c3 + n) : _mm256_setzero_pd();
      for (int64_t k = 0; k < K; ++k) {
        const double* arow = A + k * lda + m;
        const __m256d b0 = _mm256_loadu_pd(B + k * ldb + n);
        v0 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + 0), b0, v0);
        v1 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + 1), b0, v1);
        v2 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + 2), b0, v2);
        v3 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + 3), b0, v3);
      }
      _mm256_storeu_pd(c0 + n, v0);
      _mm256_storeu_pd(c1 + n, v1);
      _mm256_storeu_pd(c2 + n, v2);
      _mm256_storeu_pd(c3 + n, v3);
    }
    for (; n < N; ++n) {
      double s0 = acc ? c0[n] : 0.0;
      double s1 = acc ? c1[n] : 0.0;
      double s2 = acc ? c2[n] : 0.0;
      double s3 = acc ? c3[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) {
        const double* arow = A + k * lda + m;
        const double b = B[k * ldb + n];
        s0 += arow[0] * b;
        s1 += arow[1] * b;
        s2 += arow[2] * b;
        s3 += arow[3] * b;
      }
      c0[n] = s0;
      c1[n] = s1;
      c2[n] = s2;
      c3[n] = s3;
    }
  }
  for (; m < m1; ++m) {
    double* c0 = C + m * ldc;
    int64_t n = 0;
    for (; n + 4 <= N; n += 4) {
      __m256d v0 = acc ? _mm256_loadu_pd(c0 + n) : _mm256_setzero_pd();
      for (int64_t k = 0; k < K; ++k) {
        v0 = _mm256_fmadd_pd(_mm256_broadcast_sd(A + k * lda + m),
                             _mm256_loadu_pd(B + k * ldb + n), v0);
      }
      _mm256_storeu_pd(c0 + n, v0);
    }
    for (; n < N; ++n) {
      double s = acc ? c0[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) s += A[k * lda + m] * B[k * ldb + n];
      c0[n] = s;
    }
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t = {
      "avx2",        axpy_avx2,     scale_avx2,    vadd_avx2,     vsub_avx2,
      vmul_avx2,     vshift_avx2,   vexp_avx2,     dot_avx2,      sum_avx2,
      vmax_avx2,     relu_fwd_avx2, relu_bwd_avx2, gemm_nn_avx2,  gemm_nt_avx2,
      gemm_tn_avx2,
  };
  return t;
}

}  // namespace hetnet::kern
