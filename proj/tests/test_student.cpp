#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "hetnet/rng.hpp"
#include "hetnet/student.hpp"
#include "hetnet/tensor.hpp"

using namespace hetnet;

namespace {

const std::vector<teacher::StageSpec> kToyStages{{16, 2}, {32, 4}, {64, 8}};

Tensor random_input(int64_t b, int64_t c, int64_t h, int64_t w, uint64_t seed) {
  RngStream rng(derive_key(seed, {"student", "input"}));
  Tensor x({b, c, h, w});
  for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.normal();
  return x;
}

std::map<int, Tensor> forward_values(const student::StudentNetwork& net, const Tensor& x,
                                     bool training) {
  auto out = net(ad::Var::constant(x), training);
  std::map<int, Tensor> vals;
  for (auto& [k, v] : out) vals.emplace(k, v.value());
  return vals;
}

}  // namespace

TEST_CASE("student decodes the toy ladder back to teacher stage shapes") {
  nn::ParamStore ps;
  RngStream rng(derive_key(7, {"student", "init"}));
  student::StudentNetwork net(ps, "student", kToyStages, {1, 2, 3}, 112, rng);

  CHECK(net.embedding_channels() == 128);
  CHECK(net.in_channels() == 112);

  const Tensor o = random_input(2, 112, 8, 8, 11);
  auto pyr = net(ad::Var::constant(o), true);
  REQUIRE(pyr.size() == 3);
  CHECK(pyr.at(1).value().shape() == std::vector<int64_t>{2, 16, 32, 32});
  CHECK(pyr.at(2).value().shape() == std::vector<int64_t>{2, 32, 16, 16});
  CHECK(pyr.at(3).value().shape() == std::vector<int64_t>{2, 64, 8, 8});
  for (auto& [k, v] : pyr) {
    double mx = 0.0;
    for (int64_t i = 0; i < v.value().numel(); ++i) {
      CHECK(std::isfinite(v.value().data()[i]));
      mx = std::max(mx, std::abs(v.value().data()[i]));
    }
    CAPTURE(k);
    CHECK(mx > 0.0);
  }
}

TEST_CASE("same instance and input give bitwise equal branches") {
  nn::ParamStore ps;
  RngStream rng(derive_key(3, {"student", "init"}));
  student::StudentNetwork net(ps, "student", kToyStages, {1, 2, 3}, 112, rng);
  const Tensor o = random_input(2, 112, 8, 8, 5);

  for (bool training : {true, false}) {
    CAPTURE(training);
    auto a = forward_values(net, o, training);
    auto b = forward_values(net, o, training);
    for (auto& [k, va] : a) CHECK(max_abs_diff(va, b.at(k)) == 0.0);
  }
}

TEST_CASE("every parameter influences the output pyramid") {
  nn::ParamStore ps;
  RngStream rng(derive_key(19, {"student", "init"}));
  student::StudentNetwork net(ps, "student", kToyStages, {1, 2, 3}, 112, rng);
  const Tensor o = random_input(2, 112, 8, 8, 23);
  const auto base = forward_values(net, o, false);

  CHECK(ps.params().size() == 4 * 9);
  int insensitive = 0;
  for (const auto& [name, p] : ps.params()) {
    Tensor& value = p.node()->value;
    const Tensor saved = value;
    for (int64_t i = 0; i < value.numel(); ++i) value.data()[i] += 0.5;
    auto bumped = forward_values(net, o, false);
    value = saved;

    double dev = 0.0;
    for (auto& [k, v] : bumped) dev = std::max(dev, max_abs_diff(v, base.at(k)));
    if (dev == 0.0) {
      ++insensitive;
      MESSAGE("dead parameter: " << name);
    }
  }
  CHECK(insensitive == 0);
}

TEST_CASE("decoder follows layers_used subsets") {
  RngStream rng(derive_key(29, {"student", "init"}));

  SUBCASE("deep pair only") {
    nn::ParamStore ps;
    student::StudentNetwork net(ps, "student", kToyStages, {2, 3}, 96, rng);
    CHECK(net.embedding_channels() == 128);
    const Tensor o = random_input(2, 96, 8, 8, 31);
    auto pyr = net(ad::Var::constant(o), false);
    REQUIRE(pyr.size() == 2);
    CHECK(pyr.at(2).value().shape() == std::vector<int64_t>{2, 32, 16, 16});
    CHECK(pyr.at(3).value().shape() == std::vector<int64_t>{2, 64, 8, 8});
  }

  SUBCASE("gap in the ladder still climbs through the middle stage") {
    nn::ParamStore ps;
    student::StudentNetwork net(ps, "student", kToyStages, {1, 3}, 80, rng);
    const Tensor o = random_input(1, 80, 8, 8, 37);
    auto pyr = net(ad::Var::constant(o), false);
    REQUIRE(pyr.size() == 2);
    CHECK(pyr.count(2) == 0);
    CHECK(pyr.at(1).value().shape() == std::vector<int64_t>{1, 16, 32, 32});
    CHECK(pyr.at(3).value().shape() == std::vector<int64_t>{1, 64, 8, 8});
  }

  SUBCASE("single deepest layer") {
    nn::ParamStore ps;
    student::StudentNetwork net(ps, "student", kToyStages, {3}, 64, rng);
    CHECK(net.embedding_channels() == 128);
    const Tensor o = random_input(2, 64, 8, 8, 41);
    auto pyr = net(ad::Var::constant(o), false);
    REQUIRE(pyr.size() == 1);
    CHECK(pyr.at(3).value().shape() == std::vector<int64_t>{2, 64, 8, 8});
  }
}

TEST_CASE("student rejects malformed inputs and configs") {
  nn::ParamStore ps;
  RngStream rng(derive_key(43, {"student", "init"}));
  student::StudentNetwork net(ps, "student", kToyStages, {1, 2, 3}, 112, rng);

  CHECK_THROWS_WITH_AS(net(ad::Var::constant(Tensor({2, 64, 8, 8})), true),
                       doctest::Contains("expected (B,112,H,W)"), Error);
  CHECK_THROWS_WITH_AS(net(ad::Var::constant(Tensor({2, 112, 7, 8})), true),
                       doctest::Contains("must be even"), Error);
  CHECK_THROWS_WITH_AS(net(ad::Var::constant(Tensor({112, 8, 8})), true),
                       doctest::Contains("expected (B,112,H,W)"), Error);

  nn::ParamStore ps2;
  CHECK_THROWS_WITH_AS(student::StudentNetwork(ps2, "s", kToyStages, {}, 112, rng),
                       doctest::Contains("layers_used is empty"), Error);
  CHECK_THROWS_WITH_AS(student::StudentNetwork(ps2, "s", kToyStages, {3, 1}, 112, rng),
                       doctest::Contains("ascending"), Error);
  CHECK_THROWS_WITH_AS(student::StudentNetwork(ps2, "s", kToyStages, {1, 4}, 112, rng),
                       doctest::Contains("exceeds the teacher's 3 stages"), Error);
}

TEST_CASE("bottleneck halves and the ladder doubles spatial size") {
  nn::ParamStore ps;
  RngStream rng(derive_key(53, {"student", "init"}));
  const std::vector<teacher::StageSpec> paperish{{24, 4}, {48, 8}, {96, 16}};
  student::StudentNetwork net(ps, "student", paperish, {1, 2, 3}, 168, rng);
  CHECK(net.embedding_channels() == 192);

  const Tensor o = random_input(1, 168, 4, 4, 59);
  auto pyr = net(ad::Var::constant(o), false);
  CHECK(pyr.at(1).value().shape() == std::vector<int64_t>{1, 24, 16, 16});
  CHECK(pyr.at(2).value().shape() == std::vector<int64_t>{1, 48, 8, 8});
  CHECK(pyr.at(3).value().shape() == std::vector<int64_t>{1, 96, 4, 4});
}
