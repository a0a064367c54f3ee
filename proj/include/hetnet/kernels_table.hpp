#pragma once

// Dispatch table for the arithmetic inner loops. Backends (scalar, AVX2,
// NEON) fill one of these; everything above calls through the active table.
// Contract shared by all backends: for a given block [m0,m1) the accumulation
// order of every output element is a fixed function of the arguments, and the
// threaded drivers split work into fixed-size blocks, so a given backend is
// bitwise deterministic regardless of thread count. Elementwise kernels
// permit out == x aliasing.
//
// Kept freestanding-compatible (stdint/stddef only): the NEON TU is
// syntax-checked against a freestanding aarch64 target.

#include <stddef.h>
#include <stdint.h>

namespace hetnet::kern {

struct KernelTable {
  const char* name;

  void (*axpy)(int64_t n, double a, const double* x, double* y);   // y += a*x
  void (*scale)(int64_t n, double a, double* y);                   // y *= a
  void (*vadd)(int64_t n, const double* x, const double* y, double* out);
  void (*vsub)(int64_t n, const double* x, const double* y, double* out);
  void (*vmul)(int64_t n, const double* x, const double* y, double* out);
  void (*vshift)(int64_t n, const double* x, double c, double* out);  // out = x + c
  void (*vexp)(int64_t n, const double* x, double* out);
  double (*dot)(int64_t n, const double* x, const double* y);
  double (*sum)(int64_t n, const double* x);
  double (*vmax)(int64_t n, const double* x);
  void (*relu_fwd)(int64_t n, const double* x, double* y);          // y = max(x,0)
  void (*relu_bwd)(int64_t n, const double* x, const double* dy, double* dx);  // dx += dy*(x>0)

  // C[m,n] (+)= sum_k A[m,k]*B[k,n], rows m in [m0,m1)
  void (*gemm_nn_block)(int64_t m0, int64_t m1, int64_t K, int64_t N,
                        const double* A, int64_t lda, const double* B, int64_t ldb,
                        double* C, int64_t ldc, bool acc);
  // C[m,n] (+)= sum_k A[m,k]*B[n,k]
  void (*gemm_nt_block)(int64_t m0, int64_t m1, int64_t K, int64_t N,
                        const double* A, int64_t lda, const double* B, int64_t ldb,
                        double* C, int64_t ldc, bool acc);
  // C[m,n] (+)= sum_k A[k,m]*B[k,n]  (A stored K x M)
  void (*gemm_tn_block)(int64_t m0, int64_t m1, int64_t K, int64_t N,
                        const double* A, int64_t lda, const double* B, int64_t ldb,
                        double* C, int64_t ldc, bool acc);
};

}  // namespace hetnet::kern
