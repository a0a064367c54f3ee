#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "hetnet/kernels.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/tensor.hpp"
#include "hetnet/threadpool.hpp"

using namespace hetnet;

namespace {

// Plain triple-loop oracles, no shared code with the kernel backends.
void naive_nn(int64_t M, int64_t K, int64_t N, const Tensor& A, const Tensor& B, Tensor& C) {
  for (int64_t m = 0; m < M; ++m)
    for (int64_t n = 0; n < N; ++n) {
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += A.at(m, k) * B.at(k, n);
      C.at(m, n) = s;
    }
}

void naive_nt(int64_t M, int64_t K, int64_t N, const Tensor& A, const Tensor& B, Tensor& C) {
  for (int64_t m = 0; m < M; ++m)
    for (int64_t n = 0; n < N; ++n) {
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += A.at(m, k) * B.at(n, k);
      C.at(m, n) = s;
    }
}

void naive_tn(int64_t M, int64_t K, int64_t N, const Tensor& A, const Tensor& B, Tensor& C) {
  for (int64_t m = 0; m < M; ++m)
    for (int64_t n = 0; n < N; ++n) {
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += A.at(k, m) * B.at(k, n);
      C.at(m, n) = s;
    }
}

std::vector<std::string> available_backends() {
  std::vector<std::string> out = {"scalar"};
  if (kern::cpu_supports_avx2()) out.push_back("avx2");
  return out;
}

struct BackendGuard {
  ~BackendGuard() {
    kern::select_backend("auto");
    ThreadPool::instance().set_threads(1);
  }
};

}  // namespace

TEST_CASE("gemm variants match the naive oracle on every backend") {
  BackendGuard guard;
  RngStream rng(derive_key(11, {"test", "gemm"}));
  const int64_t M = 37, K = 29, N = 43;
  Tensor A = randn({M, K}, rng);
  Tensor B = randn({K, N}, rng);
  Tensor Bt = randn({N, K}, rng);
  Tensor At = randn({K, M}, rng);
  Tensor Onn({M, N}), Ont({M, N}), Otn({M, N});
  naive_nn(M, K, N, A, B, Onn);
  naive_nt(M, K, N, A, Bt, Ont);
  naive_tn(M, K, N, At, B, Otn);

  for (const auto& be : available_backends()) {
    CAPTURE(be);
    kern::select_backend(be);
    Tensor C({M, N});
    kern::gemm_nn(M, K, N, A.data(), K, B.data(), N, C.data(), N);
    CHECK(max_abs_diff(C, Onn) < 1e-12);
    kern::gemm_nt(M, K, N, A.data(), K, Bt.data(), K, C.data(), N);
    CHECK(max_abs_diff(C, Ont) < 1e-12);
    kern::gemm_tn(M, K, N, At.data(), M, B.data(), N, C.data(), N);
    CHECK(max_abs_diff(C, Otn) < 1e-12);

    // acc=true adds on top of existing contents
    kern::gemm_nn(M, K, N, A.data(), K, B.data(), N, C.data(), N, false);
    kern::gemm_nn(M, K, N, A.data(), K, B.data(), N, C.data(), N, true);
    double worst = 0.0;
    for (int64_t i = 0; i < C.numel(); ++i) worst = std::max(worst, std::fabs(C[i] - 2.0 * Onn[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("gemm handles thin and degenerate shapes") {
  BackendGuard guard;
  RngStream rng(derive_key(12, {"test", "gemm-edge"}));
  for (const auto& be : available_backends()) {
    CAPTURE(be);
    kern::select_backend(be);
    for (int64_t M : {1, 2, 3, 5}) {
      for (int64_t N : {1, 2, 3, 7, 9}) {
        for (int64_t K : {0, 1, 4}) {
          Tensor A = randn({M, std::max<int64_t>(K, 1)}, rng);
          Tensor B = randn({std::max<int64_t>(K, 1), N}, rng);
          Tensor C = Tensor::full({M, N}, 7.0);
          Tensor O({M, N});
          naive_nn(M, K, N, A, B, O);
          kern::gemm_nn(M, K, N, A.data(), A.dim(1), B.data(), N, C.data(), N);
          CHECK(max_abs_diff(C, O) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("scalar and simd backends agree within rounding tolerance") {
  BackendGuard guard;
  if (!kern::cpu_supports_avx2()) return;
  RngStream rng(derive_key(13, {"test", "xbackend"}));
  const int64_t M = 65, K = 130, N = 77;
  Tensor A = randn({M, K}, rng);
  Tensor B = randn({K, N}, rng);
  kern::select_backend("scalar");
  Tensor Cs({M, N});
  kern::gemm_nn(M, K, N, A.data(), K, B.data(), N, Cs.data(), N);
  kern::select_backend("avx2");
  Tensor Ca({M, N});
  kern::gemm_nn(M, K, N, A.data(), K, B.data(), N, Ca.data(), N);
  CHECK(max_abs_diff(Cs, Ca) < 1e-10);

  Tensor x = rand_uniform({1003}, rng, -30.0, 30.0);
  Tensor es({1003}), ea({1003});
  kern::select_backend("scalar");
  kern::vexp(x.numel(), x.data(), es.data());
  kern::select_backend("avx2");
  kern::vexp(x.numel(), x.data(), ea.data());
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(std::fabs(es[i] - ea[i]) <= 1e-13 * std::fabs(es[i]));
  }
}

TEST_CASE("each backend is bitwise deterministic across thread counts") {
  BackendGuard guard;
  RngStream rng(derive_key(14, {"test", "threads"}));
  const int64_t M = 211, K = 67, N = 53;
  Tensor A = randn({M, K}, rng);
  Tensor B = randn({N, K}, rng);
  for (const auto& be : available_backends()) {
    CAPTURE(be);
    kern::select_backend(be);
    Tensor C1({M, N}), C4({M, N});
    ThreadPool::instance().set_threads(1);
    kern::gemm_nt(M, K, N, A.data(), K, B.data(), K, C1.data(), N);
    ThreadPool::instance().set_threads(4);
    kern::gemm_nt(M, K, N, A.data(), K, B.data(), K, C4.data(), N);
    ThreadPool::instance().set_threads(1);
    for (int64_t i = 0; i < C1.numel(); ++i) CHECK(C1[i] == C4[i]);
  }
}

TEST_CASE("vexp matches std::exp to a few ulps over the full range") {
  BackendGuard guard;
  std::vector<double> xs;
  for (double x = -745.0; x <= 709.0; x += 0.731) xs.push_back(x);
  xs.insert(xs.end(), {0.0, 1.0, -1.0, 1e-300, -1e-300, 709.7, -745.2, 710.0, -746.0});
  std::vector<double> ys(xs.size());
  for (const auto& be : available_backends()) {
    CAPTURE(be);
    kern::select_backend(be);
    kern::vexp(static_cast<int64_t>(xs.size()), xs.data(), ys.data());
    for (size_t i = 0; i < xs.size(); ++i) {
      const double ref = std::exp(xs[i]);
      CAPTURE(xs[i]);
      if (std::isinf(ref)) {
        CHECK(std::isinf(ys[i]));
      } else if (ref == 0.0) {
        CHECK(ys[i] == 0.0);
      } else {
        CHECK(std::fabs(ys[i] - ref) <= 4e-16 * ref);
      }
    }
  }
}

TEST_CASE("softmax rows are normalized and match a direct evaluation") {
  BackendGuard guard;
  RngStream rng(derive_key(15, {"test", "softmax"}));
  const int64_t R = 17, Cc = 39;
  Tensor x = rand_uniform({R, Cc}, rng, -50.0, 50.0);
  for (const auto& be : available_backends()) {
    CAPTURE(be);
    kern::select_backend(be);
    Tensor y({R, Cc});
    kern::softmax_rows(R, Cc, x.data(), y.data());
    for (int64_t r = 0; r < R; ++r) {
      double s = 0.0;
      double direct_den = 0.0;
      double m = x.at(r, 0);
      for (int64_t c = 0; c < Cc; ++c) m = std::max(m, x.at(r, c));
      for (int64_t c = 0; c < Cc; ++c) direct_den += std::exp(x.at(r, c) - m);
      for (int64_t c = 0; c < Cc; ++c) {
        s += y.at(r, c);
        const double direct = std::exp(x.at(r, c) - m) / direct_den;
        CHECK(std::fabs(y.at(r, c) - direct) < 1e-12);
      }
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("elementwise kernels agree across backends") {
  BackendGuard guard;
  RngStream rng(derive_key(16, {"test", "elementwise"}));
  const int64_t n = 259;
  Tensor x = randn({n}, rng);
  Tensor y = randn({n}, rng);
  for (const auto& be : available_backends()) {
    CAPTURE(be);
    kern::select_backend(be);
    Tensor out({n});
    kern::vadd(n, x.data(), y.data(), out.data());
    for (int64_t i = 0; i < n; ++i) CHECK(out[i] == x[i] + y[i]);
    kern::vsub(n, x.data(), y.data(), out.data());
    for (int64_t i = 0; i < n; ++i) CHECK(out[i] == x[i] - y[i]);
    kern::vmul(n, x.data(), y.data(), out.data());
    for (int64_t i = 0; i < n; ++i) CHECK(out[i] == x[i] * y[i]);
    kern::relu_fwd(n, x.data(), out.data());
    for (int64_t i = 0; i < n; ++i) CHECK(out[i] == (x[i] > 0.0 ? x[i] : 0.0));

    Tensor dx = Tensor::full({n}, 0.5);
    kern::relu_bwd(n, x.data(), y.data(), dx.data());
    for (int64_t i = 0; i < n; ++i) CHECK(dx[i] == 0.5 + (x[i] > 0.0 ? y[i] : 0.0));

    double s = 0.0, d = 0.0, mx = x[0];
    for (int64_t i = 0; i < n; ++i) {
      s += x[i];
      d += x[i] * y[i];
      mx = std::max(mx, x[i]);
    }
    CHECK(std::fabs(kern::sum(n, x.data()) - s) < 1e-12);
    CHECK(std::fabs(kern::dot(n, x.data(), y.data()) - d) < 1e-12);
    CHECK(kern::vmax(n, x.data()) == mx);
  }
}

TEST_CASE("backend selection reports and rejects names") {
  BackendGuard guard;
  kern::select_backend("scalar");
  CHECK(kern::backend_name() == "scalar");
  CHECK_THROWS_AS(kern::select_backend("sse9"), Error);
  kern::select_backend("auto");
  if (kern::cpu_supports_avx2()) CHECK(kern::backend_name() == "avx2");
}
