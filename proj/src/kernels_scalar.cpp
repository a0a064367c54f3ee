// Reference kernels. Plain loops, no intrinsics: these define the semantics
// the SIMD backends are equivalence-tested against.

#include "hetnet/kernels_exp.hpp"
#include "hetnet/kernels_table.hpp"

namespace hetnet::kern {
namespace scalar {
namespace {

void axpy(int64_t n, double a, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(int64_t n, double a, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] *= a;
}

void vadd(int64_t n, const double* x, const double* y, double* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void vsub(int64_t n, const double* x, const double* y, double* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void vmul(int64_t n, const double* x, const double* y, double* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void vshift(int64_t n, const double* x, double c, double* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] + c;
}

void vexp(int64_t n, const double* x, double* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = exp_ref(x[i]);
}

double dot(int64_t n, const double* x, const double* y) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum(int64_t n, const double* x) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double vmax(int64_t n, const double* x) {
  if (n <= 0) return -1.0 / 0.0;
  double m = x[0];
  for (int64_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

void relu_fwd(int64_t n, const double* x, double* y) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(int64_t n, const double* x, const double* dy, double* dx) {
  for (int64_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

void gemm_nn_block(int64_t m0, int64_t m1, int64_t K, int64_t N,
                   const double* A, int64_t lda, const double* B, int64_t ldb,
                   double* C, int64_t ldc, bool acc) {
  for (int64_t m = m0; m < m1; ++m) {
    double* crow = C + m * ldc;
    if (!acc) {
      for (int64_t n = 0; n < N; ++n) crow[n] = 0.0;
    }
    const double* arow = A + m * lda;
    for (int64_t k = 0; k < K; ++k) {
      const double a = arow[k];
      const double* brow = B + k * ldb;
      for (int64_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

void gemm_nt_block(int64_t m0, int64_t m1, int64_t K, int64_t N,
                   const double* A, int64_t lda, const double* B, int64_t ldb,
                   double* C, int64_t ldc, bool acc) {
  for (int64_t m = m0; m < m1; ++m) {
    const double* arow = A + m * lda;
    double* crow = C + m * ldc;
    for (int64_t n = 0; n < N; ++n) {
      const double* brow = B + n * ldb;
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += arow[k] * brow[k];
      crow[n] = acc ? crow[n] + s : s;
    }
  }
}

void gemm_tn_block(int64_t m0, int64_t m1, int64_t K, int64_t N,
                   const double* A, int64_t lda, const double* B, int64_t ldb,
                   double* C, int64_t ldc, bool acc) {
  for (int64_t m = m0; m < m1; ++m) {
    double* crow = C + m * ldc;
    if (!acc) {
      for (int64_t n = 0; n < N; ++n) crow[n] = 0.0;
    }
    for (int64_t k = 0; k < K; ++k) {
      const double a = A[k * lda + m];
      const double* brow = B + k * ldb;
      for (int64_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

}  // namespace
}  // namespace scalar

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",
      scalar::axpy,
      scalar::scale,
      scalar::vadd,
      scalar::vsub,
      scalar::vmul,
      scalar::vshift,
      scalar::vexp,
      scalar::dot,
      scalar::sum,
      scalar::vmax,
      scalar::relu_fwd,
      scalar::relu_bwd,
      scalar::gemm_nn_block,
      scalar::gemm_nt_block,
      scalar::gemm_tn_block,
  };
  return t;
}

}  // namespace hetnet::kern
