#pragma once

#include <string>

#include "hetnet/kernels_table.hpp"

namespace hetnet::kern {

// Active backend. Resolution order: explicit select_backend() call, else the
// HETNET_SIMD env var ("scalar", "avx2", "neon", "auto"), else runtime CPU
// detection with scalar fallback.
const KernelTable& table();
void select_backend(const std::string& name);
std::string backend_name();
bool cpu_supports_avx2();

// Threaded drivers over the active table. Row-major, ld* = row strides.
// C[m,n] (+)= sum_k A[m,k] * B[k,n]
void gemm_nn(int64_t M, int64_t K, int64_t N, const double* A, int64_t lda,
             const double* B, int64_t ldb, double* C, int64_t ldc, bool acc = false);
// C[m,n] (+)= sum_k A[m,k] * B[n,k]
void gemm_nt(int64_t M, int64_t K, int64_t N, const double* A, int64_t lda,
             const double* B, int64_t ldb, double* C, int64_t ldc, bool acc = false);
// C[m,n] (+)= sum_k A[k,m] * B[k,n]
void gemm_tn(int64_t M, int64_t K, int64_t N, const double* A, int64_t lda,
             const double* B, int64_t ldb, double* C, int64_t ldc, bool acc = false);

// Row-wise softmax with max subtraction; out may alias x.
void softmax_rows(int64_t rows, int64_t cols, const double* x, double* out);

inline void axpy(int64_t n, double a, const double* x, double* y) { table().axpy(n, a, x, y); }
inline void scale(int64_t n, double a, double* y) { table().scale(n, a, y); }
inline void vadd(int64_t n, const double* x, const double* y, double* out) { table().vadd(n, x, y, out); }
inline void vsub(int64_t n, const double* x, const double* y, double* out) { table().vsub(n, x, y, out); }
inline void vmul(int64_t n, const double* x, const double* y, double* out) { table().vmul(n, x, y, out); }
inline void vshift(int64_t n, const double* x, double c, double* out) { table().vshift(n, x, c, out); }
inline void vexp(int64_t n, const double* x, double* out) { table().vexp(n, x, out); }
inline double dot(int64_t n, const double* x, const double* y) { return table().dot(n, x, y); }
inline double sum(int64_t n, const double* x) { return table().sum(n, x); }
inline double vmax(int64_t n, const double* x) { return table().vmax(n, x); }
inline void relu_fwd(int64_t n, const double* x, double* y) { table().relu_fwd(n, x, y); }
inline void relu_bwd(int64_t n, const double* x, const double* dy, double* dx) {
  table().relu_bwd(n, x, dy, dx);
}

}  // namespace hetnet::kern
