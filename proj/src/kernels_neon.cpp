// NEON (aarch64) kernel backend. Compiled only on aarch64 builds; on x86 CI
// the TU is still syntax-checked against a freestanding aarch64 target, so
// includes are restricted to arm_neon.h and the freestanding kernel headers.
//
// Accumulation order per output element is a fixed function of the block
// arguments, matching the table contract.

#include <arm_neon.h>

#include "hetnet/kernels_exp.hpp"
#include "hetnet/kernels_table.hpp"

namespace hetnet::kern {
namespace {

inline double hsum(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

void axpy_neon(int64_t n, double a, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    vst1q_f64(y + i + 2, vfmaq_f64(vld1q_f64(y + i + 2), va, vld1q_f64(x + i + 2)));
  }
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(int64_t n, double a, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(va, vld1q_f64(y + i)));
  for (; i < n; ++i) y[i] *= a;
}

void vadd_neon(int64_t n, const double* x, const double* y, double* out) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void vsub_neon(int64_t n, const double* x, const double* y, double* out) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

void vmul_neon(int64_t n, const double* x, const double* y, double* out) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void vshift_neon(int64_t n, const double* x, double c, double* out) {
  const float64x2_t vc = vdupq_n_f64(c);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vc));
  for (; i < n; ++i) out[i] = x[i] + c;
}

// Vector port of exp_ref; same reduction and rational approximation.
inline float64x2_t exp2lanes(float64x2_t x) {
  using E = ExpConsts;
  const float64x2_t max_arg = vdupq_n_f64(E::kMaxArg);
  const float64x2_t min_arg = vdupq_n_f64(E::kMinArg);
  const uint64x2_t hi_mask = vcgtq_f64(x, max_arg);
  const uint64x2_t lo_mask = vcltq_f64(x, min_arg);
  x = vminq_f64(vmaxq_f64(x, min_arg), max_arg);

  const float64x2_t pn =
      vrndmq_f64(vfmaq_f64(vdupq_n_f64(0.5), vdupq_n_f64(E::kLog2E), x));
  x = vfmsq_f64(x, pn, vdupq_n_f64(E::kC1));
  x = vfmsq_f64(x, pn, vdupq_n_f64(E::kC2));

  const float64x2_t xx = vmulq_f64(x, x);
  float64x2_t p = vfmaq_f64(vdupq_n_f64(E::kP1), vdupq_n_f64(E::kP0), xx);
  p = vfmaq_f64(vdupq_n_f64(E::kP2), p, xx);
  p = vmulq_f64(p, x);
  float64x2_t q = vfmaq_f64(vdupq_n_f64(E::kQ1), vdupq_n_f64(E::kQ0), xx);
  q = vfmaq_f64(vdupq_n_f64(E::kQ2), q, xx);
  q = vfmaq_f64(vdupq_n_f64(E::kQ3), q, xx);
  const float64x2_t e = vdivq_f64(p, vsubq_f64(q, p));
  const float64x2_t r = vfmaq_f64(vdupq_n_f64(1.0), vdupq_n_f64(2.0), e);

  // n1 = trunc(n/2), n2 = n - n1, as in exp_ref.
  const float64x2_t n1d = vrndq_f64(vmulq_f64(pn, vdupq_n_f64(0.5)));
  const float64x2_t n2d = vsubq_f64(pn, n1d);
  const int64x2_t bias = vdupq_n_s64(1023);
  const float64x2_t f1 = vreinterpretq_f64_s64(
      vshlq_n_s64(vaddq_s64(vcvtq_s64_f64(n1d), bias), 52));
  const float64x2_t f2 = vreinterpretq_f64_s64(
      vshlq_n_s64(vaddq_s64(vcvtq_s64_f64(n2d), bias), 52));

  float64x2_t out = vmulq_f64(vmulq_f64(r, f1), f2);
  out = vbslq_f64(lo_mask, vdupq_n_f64(0.0), out);
  out = vbslq_f64(hi_mask, vdupq_n_f64(1.0 / 0.0), out);
  return out;
}

void vexp_neon(int64_t n, const double* x, double* out) {
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, exp2lanes(vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = exp_ref(x[i]);
}

double dot_neon(int64_t n, const double* x, const double* y) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = hsum(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_neon(int64_t n, const double* x) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
  }
  for (; i + 2 <= n; i += 2) acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
  double s = hsum(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double vmax_neon(int64_t n, const double* x) {
  if (n <= 0) return -1.0 / 0.0;
  double m = x[0];
  int64_t i = 1;
  if (n >= 3) {
    float64x2_t vm = vld1q_f64(x + 1);
    i = 3;
    for (; i + 2 <= n; i += 2) vm = vmaxq_f64(vm, vld1q_f64(x + i));
    const double lane = vmaxvq_f64(vm);
    if (lane > m) m = lane;
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

void relu_fwd_neon(int64_t n, const double* x, double* y) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmaxq_f64(vld1q_f64(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_neon(int64_t n, const double* x, const double* dy, double* dx) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  int64_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
    const float64x2_t g = vreinterpretq_f64_u64(
        vandq_u64(mask, vreinterpretq_u64_f64(vld1q_f64(dy + i))));
    vst1q_f64(dx + i, vaddq_f64(vld1q_f64(dx + i), g));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

// ---- GEMM micro-kernels ----------------------------------------------------

void gemm_nn_neon(int64_t m0, int64_t m1, int64_t K, int64_t N, const double* A,
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
      float64x2_t v00 = acc ? vld1q_f64(c0 + n) : vdupq_n_f64(0.0);
      float64x2_t v01 = acc ? vld1q_f64(c0 + n + 2) : vdupq_n_f64(0.0);
      float64x2_t v10 = acc ? vld1q_f64(c1 + n) : vdupq_n_f64(0.0);
      float64x2_t v11 = acc ? vld1q_f64(c1 + n + 2) : vdupq_n_f64(0.0);
      for (int64_t k = 0; k < K; ++k) {
        const float64x2_t b0 = vld1q_f64(B + k * ldb + n);
        const float64x2_t b1 = vld1q_f64(B + k * ldb + n + 2);
        const float64x2_t va0 = vdupq_n_f64(a0[k]);
        const float64x2_t va1 = vdupq_n_f64(a1[k]);
        v00 = vfmaq_f64(v00, va0, b0);
        v01 = vfmaq_f64(v01, va0, b1);
        v10 = vfmaq_f64(v10, va1, b0);
        v11 = vfmaq_f64(v11, va1, b1);
      }
      vst1q_f64(c0 + n, v00);
      vst1q_f64(c0 + n + 2, v01);
      vst1q_f64(c1 + n, v10);
      vst1q_f64(c1 + n + 2, v11);
    }
    for (; n < N; ++n) {
      double s0 = acc ? c0[n] : 0.0;
      double s1 = acc ? c1[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) {
        const double b = B[k * ldb + n];
        s0 += a0[k] * b;
        s1 += a1[k] * b;
      }
      c0[n] = s0;
      c1[n] = s1;
    }
  }
  for (; m < m1; ++m) {
    const double* a0 = A + m * lda;
    double* c0 = C + m * ldc;
    int64_t n = 0;
    for (; n + 2 <= N; n += 2) {
      float64x2_t v0 = acc ? vld1q_f64(c0 + n) : vdupq_n_f64(0.0);
      for (int64_t k = 0; k < K; ++k) {
        v0 = vfmaq_f64(v0, vdupq_n_f64(a0[k]), vld1q_f64(B + k * ldb + n));
      }
      vst1q_f64(c0 + n, v0);
    }
    for (; n < N; ++n) {
      double s = acc ? c0[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) s += a0[k] * B[k * ldb + n];
      c0[n] = s;
    }
  }
}

void gemm_nt_neon(int64_t m0, int64_t m1, int64_t K, int64_t N, const double* A,
                  int64_t lda, const double* B, int64_t ldb, double* C, int64_t ldc,
                  bool acc) {
  for (int64_t m = m0; m < m1; ++m) {
    const double* a0 = A + m * lda;
    double* c0 = C + m * ldc;
    int64_t n = 0;
    for (; n + 2 <= N; n += 2) {
      const double* b0 = B + n * ldb;
      const double* b1 = b0 + ldb;
      float64x2_t v0 = vdupq_n_f64(0.0);
      float64x2_t v1 = vdupq_n_f64(0.0);
      int64_t k = 0;
      for (; k + 2 <= K; k += 2) {
        const float64x2_t va = vld1q_f64(a0 + k);
        v0 = vfmaq_f64(v0, va, vld1q_f64(b0 + k));
        v1 = vfmaq_f64(v1, va, vld1q_f64(b1 + k));
      }
      double s0 = hsum(v0);
      double s1 = hsum(v1);
      for (; k < K; ++k) {
        s0 += a0[k] * b0[k];
        s1 += a0[k] * b1[k];
      }
      if (acc) {
        c0[n] += s0;
        c0[n + 1] += s1;
      } else {
        c0[n] = s0;
        c0[n + 1] = s1;
      }
    }
    for (; n < N; ++n) {
      const double* b0 = B + n * ldb;
      float64x2_t v0 = vdupq_n_f64(0.0);
      int64_t k = 0;
      for (; k + 2 <= K; k += 2) v0 = vfmaq_f64(v0, vld1q_f64(a0 + k), vld1q_f64(b0 + k));
      double s = hsum(v0);
      for (; k < K; ++k) s += a0[k] * b0[k];
      c0[n] = acc ? c0[n] + s : s;
    }
  }
}

void gemm_tn_neon(int64_t m0, int64_t m1, int64_t K, int64_t N, const double* A,
                  int64_t lda, const double* B, int64_t ldb, double* C, int64_t ldc,
                  bool acc) {
  int64_t m = m0;
  for (; m + 2 <= m1; m += 2) {
    double* c0 = C + m * ldc;
    double* c1 = c0 + ldc;
    int64_t n = 0;
    for (; n + 2 <= N; n += 2) {
      float64x2_t v0 = acc ? vld1q_f64(c0 + n) : vdupq_n_f64(0.0);
      float64x2_t v1 = acc ? vld1q_f64(c1 + n) : vdupq_n_f64(0.0);
      for (int64_t k = 0; k < K; ++k) {
        const double* arow = A + k * lda + m;
        const float64x2_t b0 = vld1q_f64(B + k * ldb + n);
        v0 = vfmaq_f64(v0, vdupq_n_f64(arow[0]), b0);
        v1 = vfmaq_f64(v1, vdupq_n_f64(arow[1]), b0);
      }
      vst1q_f64(c0 + n, v0);
      vst1q_f64(c1 + n, v1);
    }
    for (; n < N; ++n) {
      double s0 = acc ? c0[n] : 0.0;
      double s1 = acc ? c1[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) {
        const double* arow = A + k * lda + m;
        const double b = B[k * ldb + n];
        s0 += arow[0] * b;
        s1 += arow[1] * b;
      }
      c0[n] = s0;
      c1[n] = s1;
    }
  }
  for (; m < m1; ++m) {
    double* c0 = C + m * ldc;
    int64_t n = 0;
    for (; n + 2 <= N; n += 2) {
      float64x2_t v0 = acc ? vld1q_f64(c0 + n) : vdupq_n_f64(0.0);
      for (int64_t k = 0; k < K; ++k) {
        v0 = vfmaq_f64(v0, vdupq_n_f64(A[k * lda + m]), vld1q_f64(B + k * ldb + n));
      }
      vst1q_f64(c0 + n, v0);
    }
    for (; n < N; ++n) {
      double s = acc ? c0[n] : 0.0;
      for (int64_t k = 0; k < K; ++k) s += A[k * lda + m] * B[k * ldb + n];
      c0[n] = s;
    }
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable t = {
      "neon",        axpy_neon,     scale_neon,    vadd_neon,     vsub_neon,
      vmul_neon,     vshift_neon,   vexp_neon,     dot_neon,      sum_neon,
      vmax_neon,     relu_fwd_neon, relu_bwd_neon, gemm_nn_neon,  gemm_nt_neon,
      gemm_tn_neon,
  };
  return t;
}

}  // namespace hetnet::kern
