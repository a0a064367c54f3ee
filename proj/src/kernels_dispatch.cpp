#include "hetnet/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>

#include "hetnet/common.hpp"
#include "hetnet/threadpool.hpp"

namespace hetnet::kern {

const KernelTable& scalar_table();
#if defined(HETNET_WITH_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(HETNET_WITH_NEON)
const KernelTable& neon_table();
#endif

bool cpu_supports_avx2() {
#if defined(HETNET_WITH_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* resolve(const std::string& name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") {
#if defined(HETNET_WITH_AVX2)
    HT_CHECK(cpu_supports_avx2(), "kernel backend 'avx2' requested but this CPU lacks AVX2/FMA");
    return &avx2_table();
#else
    fail("kernel backend 'avx2' not compiled into this build");
#endif
  }
  if (name == "neon") {
#if defined(HETNET_WITH_NEON)
    return &neon_table();
#else
    fail("kernel backend 'neon' not compiled into this build");
#endif
  }
  if (name == "auto") {
#if defined(HETNET_WITH_AVX2)
    if (cpu_supports_avx2()) return &avx2_table();
#endif
#if defined(HETNET_WITH_NEON)
    return &neon_table();
#else
    return &scalar_table();
#endif
  }
  fail("unknown kernel backend '" + name + "' (expected auto, scalar, avx2, or neon)");
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{[] {
    const char* env = std::getenv("HETNET_SIMD");
    return resolve(env && *env ? env : "auto");
  }()};
  return slot;
}

// Rows are carved into fixed blocks before threading so the micro-kernel
// tiling of any given row never depends on the thread count.
constexpr int64_t kRowBlock = 64;

template <typename BlockFn>
void gemm_driver(int64_t M, int64_t N, const BlockFn& block) {
  if (M <= 0 || N <= 0) return;
  const int64_t nblocks = (M + kRowBlock - 1) / kRowBlock;
  ThreadPool::instance().parallel_for(nblocks, 1, [&](int64_t b0, int64_t b1) {
    for (int64_t b = b0; b < b1; ++b) {
      block(b * kRowBlock, std::min(M, b * kRowBlock + kRowBlock));
    }
  });
}

}  // namespace

const KernelTable& table() { return *active_slot().load(std::memory_order_acquire); }

void select_backend(const std::string& name) {
  active_slot().store(resolve(name), std::memory_order_release);
}

std::string backend_name() { return table().name; }

void gemm_nn(int64_t M, int64_t K, int64_t N, const double* A, int64_t lda,
             const double* B, int64_t ldb, double* C, int64_t ldc, bool acc) {
  const KernelTable& t = table();
  gemm_driver(M, N, [&](int64_t m0, int64_t m1) {
    t.gemm_nn_block(m0, m1, K, N, A, lda, B, ldb, C, ldc, acc);
  });
}

void gemm_nt(int64_t M, int64_t K, int64_t N, const double* A, int64_t lda,
             const double* B, int64_t ldb, double* C, int64_t ldc, bool acc) {
  const KernelTable& t = table();
  gemm_driver(M, N, [&](int64_t m0, int64_t m1) {
    t.gemm_nt_block(m0, m1, K, N, A, lda, B, ldb, C, ldc, acc);
  });
}

void gemm_tn(int64_t M, int64_t K, int64_t N, const double* A, int64_t lda,
             const double* B, int64_t ldb, double* C, int64_t ldc, bool acc) {
  const KernelTable& t = table();
  gemm_driver(M, N, [&](int64_t m0, int64_t m1) {
    t.gemm_tn_block(m0, m1, K, N, A, lda, B, ldb, C, ldc, acc);
  });
}

void softmax_rows(int64_t rows, int64_t cols, const double* x, double* out) {
  if (rows <= 0 || cols <= 0) return;
  const KernelTable& t = table();
  const int64_t grain = std::max<int64_t>(1, 4096 / cols);
  ThreadPool::instance().parallel_for(rows, grain, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      const double* xr = x + r * cols;
      double* yr = out + r * cols;
      const double m = t.vmax(cols, xr);
      t.vshift(cols, xr, -m, yr);
      t.vexp(cols, yr, yr);
      t.scale(cols, 1.0 / t.sum(cols, yr), yr);
    }
  });
}

}  // namespace hetnet::kern
