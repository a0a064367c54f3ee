#include "hetnet/nn.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "hetnet/autodiff.hpp"
#include "hetnet/common.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/tensor.hpp"

using namespace hetnet;

namespace {

// Hand-rolled Adam recurrence on plain scalars, kept independent of the
// optimizer implementation.
struct ScalarAdamOracle {
  double m = 0.0, v = 0.0;
  int64_t t = 0;
  double lr, b1, b2, eps;
  double step(double p, double g) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mhat = m / (1.0 - std::pow(b1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(b2, static_cast<double>(t)));
    return p - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace

TEST_CASE("adam matches the scalar recurrence over several steps") {
  nn::ParamStore ps;
  auto p = ps.param("p", Tensor::full({1}, 2.0));
  nn::Adam opt({p}, 0.1, 0.5, 0.999);
  ScalarAdamOracle oracle{0, 0, 0, 0.1, 0.5, 0.999, 1e-8};

  double expect = 2.0;
  const std::vector<double> grads = {1.0, -0.3, 0.05, 2.0, -1.7};
  for (double g : grads) {
    opt.zero_grad();
    p.node()->ensure_grad();
    p.node()->grad.data()[0] = g;
    opt.step();
    expect = oracle.step(expect, g);
    CHECK(p.value().data()[0] == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(opt.steps_taken() == 5);
}

TEST_CASE("adam drives a tiny least-squares problem to its optimum") {
  nn::ParamStore ps;
  RngStream rng(derive_key(7, {"nn-test"}));
  auto w = ps.param("w", randn({3}, rng));
  const Tensor target = Tensor({3}, {1.0, -2.0, 0.5});

  nn::Adam opt({w}, 0.05, 0.9, 0.999);
  for (int it = 0; it < 400; ++it) {
    opt.zero_grad();
    // loss = sum (w - target)^2, gradient written directly.
    w.node()->ensure_grad();
    for (int64_t i = 0; i < 3; ++i)
      w.node()->grad.data()[i] = 2.0 * (w.value().data()[i] - target.data()[i]);
    opt.step();
  }
  for (int64_t i = 0; i < 3; ++i)
    CHECK(w.value().data()[i] == doctest::Approx(target.data()[i]).epsilon(1e-4));
}

TEST_CASE("adam load_state resumes the exact trajectory") {
  auto run = [](int total_steps, int split) {
    nn::ParamStore ps;
    auto p = ps.param("p", Tensor::full({2}, 1.0));
    nn::Adam opt({p}, 0.07, 0.5, 0.999);
    std::vector<Tensor> m_snap, v_snap;
    int64_t t_snap = 0;
    for (int s = 0; s < total_steps; ++s) {
      if (s == split) {
        m_snap = opt.first_moments();
        v_snap = opt.second_moments();
        t_snap = opt.steps_taken();
      }
      opt.zero_grad();
      p.node()->ensure_grad();
      p.node()->grad.data()[0] = 0.3 * (s + 1);
      p.node()->grad.data()[1] = -0.1 * (s + 1);
      opt.step();
    }
    return std::make_tuple(p.value(), m_snap, v_snap, t_snap);
  };

  auto [full, m_snap, v_snap, t_snap] = run(6, 3);

  nn::ParamStore ps;
  auto p = ps.param("p", Tensor::full({2}, 1.0));
  nn::Adam first(
      {p}, 0.07, 0.5, 0.999);
  for (int s = 0; s < 3; ++s) {
    first.zero_grad();
    p.node()->ensure_grad();
    p.node()->grad.data()[0] = 0.3 * (s + 1);
    p.node()->grad.data()[1] = -0.1 * (s + 1);
    first.step();
  }
  nn::Adam resumed({p}, 0.07, 0.5, 0.999);
  resumed.load_state(m_snap, v_snap, t_snap);
  for (int s = 3; s < 6; ++s) {
    resumed.zero_grad();
    p.node()->ensure_grad();
    p.node()->grad.data()[0] = 0.3 * (s + 1);
    p.node()->grad.data()[1] = -0.1 * (s + 1);
    resumed.step();
  }
  CHECK(max_abs_diff(p.value(), full) == 0.0);
}

TEST_CASE("param store keeps registration order and rejects duplicates") {
  nn::ParamStore ps;
  ps.param("a", Tensor({2}));
  ps.param("b", Tensor({3}));
  ps.buffer("rb", Tensor({4}));
  ps.param("c", Tensor({5}));

  REQUIRE(ps.params().size() == 3);
  CHECK(ps.params()[0].first == "a");
  CHECK(ps.params()[1].first == "b");
  CHECK(ps.params()[2].first == "c");
  CHECK(ps.param_count() == 2 + 3 + 5);
  CHECK(ps.buffers().size() == 1);
  CHECK(ps.find_param("b").value().numel() == 3);

  CHECK_THROWS_AS(ps.param("b", Tensor({1})), Error);
  CHECK_THROWS_AS(ps.buffer("rb", Tensor({1})), Error);
  CHECK_THROWS_AS(ps.find_param("missing"), Error);
}

TEST_CASE("conv module initializes deterministically from the seed") {
  nn::ParamStore ps1, ps2;
  RngStream r1(derive_key(42, {"conv-init"}));
  RngStream r2(derive_key(42, {"conv-init"}));
  nn::Conv2d c1(ps1, "c", 3, 8, 3, 1, 1, true, r1);
  nn::Conv2d c2(ps2, "c", 3, 8, 3, 1, 1, true, r2);
  CHECK(max_abs_diff(c1.w.value(), c2.w.value()) == 0.0);

  // He-style spread: sample std close to sqrt(2 / fan_in), fan_in = 3*3*3.
  double ss = 0.0;
  const Tensor& w = c1.w.value();
  for (int64_t i = 0; i < w.numel(); ++i) ss += w.data()[i] * w.data()[i];
  const double sd = std::sqrt(ss / w.numel());
  CHECK(sd == doctest::Approx(std::sqrt(2.0 / 27.0)).epsilon(0.35));
  // Bias starts at zero.
  for (int64_t i = 0; i < c1.b.value().numel(); ++i) CHECK(c1.b.value().data()[i] == 0.0);
}

TEST_CASE("batch norm module owns its running statistics through the store") {
  nn::ParamStore ps;
  nn::BatchNorm2d bn(ps, "bn", 4);
  REQUIRE(ps.buffers().size() == 2);
  CHECK(ps.buffers()[0].first == "bn.running_mean");
  CHECK(ps.buffers()[1].first == "bn.running_var");

  RngStream rng(derive_key(3, {"bn-mod"}));
  auto x = ad::Var::constant(randn({2, 4, 3, 3}, rng));
  (void)bn(x, true);
  // Store buffer and module buffer alias the same tensor.
  CHECK(ps.buffers()[0].second.get() == bn.running_mean.get());
  double moved = 0.0;
  for (int64_t i = 0; i < 4; ++i) moved += std::abs(bn.running_mean->data()[i]);
  CHECK(moved > 0.0);

  // Eval pass leaves running stats untouched.
  const Tensor before = *bn.running_mean;
  (void)bn(x, false);
  CHECK(max_abs_diff(before, *bn.running_mean) == 0.0);
}
