#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "hetnet/model.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/tensor.hpp"

using namespace hetnet;

namespace {

ExperimentConfig toy_config(const std::string& extra = "") {
  return config_from_text("image_size=64\nseed=9\n" + extra);
}

Tensor random_batch(int64_t b, int64_t s, uint64_t seed) {
  RngStream rng(derive_key(seed, {"model", "batch"}));
  Tensor x({b, 3, s, s});
  for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = rng.normal();
  return x;
}

bool has_param(const nn::ParamStore& ps, const std::string& needle) {
  for (const auto& [name, p] : ps.params())
    if (name.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("heterogeneous model wires both teachers through fusion to the student") {
  auto m = model::HetNet::build(toy_config());
  CHECK(m.uses_global());
  CHECK(m.fused_channels() == 112);
  CHECK(m.local_encoder().backbone() == "toy_cnn");
  CHECK(m.global_encoder().backbone() == "toy_attn");

  const Tensor batch = random_batch(2, 64, 1);
  auto tf = m.extract(batch);
  REQUIRE(tf.local.size() == 3);
  REQUIRE(tf.global_aligned.size() == 3);
  CHECK(tf.local.at(1).shape() == std::vector<int64_t>{2, 16, 32, 32});
  CHECK(tf.local.at(2).shape() == std::vector<int64_t>{2, 32, 16, 16});
  CHECK(tf.local.at(3).shape() == std::vector<int64_t>{2, 64, 8, 8});
  CHECK(tf.global_aligned.at(1).shape() == std::vector<int64_t>{2, 16, 32, 32});
  CHECK(tf.global_aligned.at(2).shape() == std::vector<int64_t>{2, 32, 16, 16});
  CHECK(tf.global_aligned.at(3).shape() == std::vector<int64_t>{2, 64, 8, 8});

  ad::Var o = m.fuse(tf, true);
  CHECK(o.value().shape() == std::vector<int64_t>{2, 112, 8, 8});
  CHECK(o.requires_grad());

  auto pyr = m.student_forward(o, true);
  REQUIRE(pyr.size() == 3);
  for (int k : {1, 2, 3}) CHECK(pyr.at(k).value().shape() == tf.local.at(k).shape());
}

TEST_CASE("single-teacher structures run without a global branch") {
  SUBCASE("cnn only") {
    auto m = model::HetNet::build(toy_config("teacher_structure=cnn_only\n"));
    CHECK_FALSE(m.uses_global());
    CHECK(m.local_encoder().backbone() == "toy_cnn");
    CHECK_THROWS_WITH_AS(m.global_encoder(), doctest::Contains("no global encoder"), Error);

    auto tf = m.extract(random_batch(1, 64, 2));
    CHECK(tf.global_aligned.empty());
    ad::Var o = m.fuse(tf, true);
    CHECK(o.value().shape() == std::vector<int64_t>{1, 112, 8, 8});
    CHECK(m.student_forward(o, true).at(1).value().shape() ==
          std::vector<int64_t>{1, 16, 32, 32});
  }

  SUBCASE("attention only, student mirrors the attention ladder") {
    auto m = model::HetNet::build(toy_config("teacher_structure=trans_only\n"));
    CHECK_FALSE(m.uses_global());
    CHECK(m.local_encoder().backbone() == "toy_attn");

    auto tf = m.extract(random_batch(1, 64, 3));
    CHECK(tf.local.at(1).shape() == std::vector<int64_t>{1, 16, 16, 16});
    CHECK(tf.local.at(3).shape() == std::vector<int64_t>{1, 64, 4, 4});
    ad::Var o = m.fuse(tf, true);
    CHECK(o.value().shape() == std::vector<int64_t>{1, 112, 4, 4});
    auto pyr = m.student_forward(o, true);
    for (int k : {1, 2, 3}) CHECK(pyr.at(k).value().shape() == tf.local.at(k).shape());
  }
}

TEST_CASE("disabling fusion swaps attention blocks for plain alignment") {
  auto m = model::HetNet::build(toy_config("algf_enabled=false\n"));
  CHECK_FALSE(m.uses_global());
  CHECK(has_param(m.params(), "align_local"));
  CHECK_FALSE(has_param(m.params(), ".q."));
  CHECK_FALSE(has_param(m.params(), ".expand."));

  auto tf = m.extract(random_batch(1, 64, 4));
  CHECK(tf.global_aligned.empty());
  CHECK(m.fuse(tf, true).value().shape() == std::vector<int64_t>{1, 112, 8, 8});

  teacher::Pyramid fake_global = tf.local;
  CHECK_THROWS_WITH_AS(m.fuse(tf.local, fake_global, true),
                       doctest::Contains("no global branch"), Error);
}

TEST_CASE("feature geometry and layer subsets follow the local teacher") {
  auto full = model::HetNet::build(toy_config());
  auto dims = full.feature_dims();
  REQUIRE(dims.size() == 3);
  CHECK(dims.at(1) == lmgn::LayerDims{16, 32, 32});
  CHECK(dims.at(2) == lmgn::LayerDims{32, 16, 16});
  CHECK(dims.at(3) == lmgn::LayerDims{64, 8, 8});

  auto subset = model::HetNet::build(toy_config("layers_used=2,3\n"));
  CHECK(subset.fused_channels() == 96);
  auto tf = subset.extract(random_batch(1, 64, 5));
  REQUIRE(tf.local.size() == 2);
  CHECK(subset.fuse(tf, true).value().shape() == std::vector<int64_t>{1, 96, 8, 8});
  auto pyr = subset.student_forward(subset.fuse(tf, true), true);
  REQUIRE(pyr.size() == 2);
  CHECK(pyr.at(2).value().shape() == std::vector<int64_t>{1, 32, 16, 16});
  CHECK(pyr.at(3).value().shape() == std::vector<int64_t>{1, 64, 8, 8});
}

TEST_CASE("construction is deterministic in the seed") {
  auto a = model::HetNet::build(toy_config());
  auto b = model::HetNet::build(toy_config());
  const auto& pa = a.params().params();
  const auto& pb = b.params().params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(max_abs_diff(pa[i].second.value(), pb[i].second.value()) == 0.0);
  }
  CHECK(a.local_encoder().param_checksum() == b.local_encoder().param_checksum());

  auto c = model::HetNet::build(config_from_text("image_size=64\nseed=10\n"));
  double dev = 0.0;
  const auto& pc = c.params().params();
  for (size_t i = 0; i < pa.size(); ++i)
    dev = std::max(dev, max_abs_diff(pa[i].second.value(), pc[i].second.value()));
  CHECK(dev > 0.0);
}

TEST_CASE("fuse rejects malformed pyramids") {
  auto m = model::HetNet::build(toy_config());
  auto tf = m.extract(random_batch(1, 64, 6));

  teacher::Pyramid missing = tf.local;
  missing.erase(2);
  CHECK_THROWS_WITH_AS(m.fuse(missing, tf.global_aligned, true),
                       doctest::Contains("expects 3 local layers"), Error);

  teacher::Pyramid mislabeled = tf.local;
  mislabeled.erase(2);
  mislabeled.emplace(5, tf.local.at(2));
  CHECK_THROWS_WITH_AS(m.fuse(mislabeled, tf.global_aligned, true),
                       doctest::Contains("missing local layer 2"), Error);

  teacher::Pyramid no_global;
  CHECK_THROWS_WITH_AS(m.fuse(tf.local, no_global, true),
                       doctest::Contains("missing global layer"), Error);
}
