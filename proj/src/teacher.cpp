#include "hetnet/teacher.hpp"

#include "hetnet/common.hpp"
#include "hetnet/container.hpp"
#include "hetnet/image.hpp"
#include "hetnet/rng.hpp"
#include "teacher_impl.hpp"

namespace hetnet::teacher {

Encoder Encoder::load(const std::string& backbone, const std::string& weights_source,
                      uint64_t seed) {
  RngStream rng(derive_key(seed, {"teacher", backbone}));
  Encoder e;
  if (backbone == "toy_cnn")
    e.impl_ = make_toy_cnn(rng);
  else if (backbone == "toy_attn")
    e.impl_ = make_toy_attn(rng);
  else if (backbone == "wide_resnet50")
    e.impl_ = make_wide_resnet50(rng);
  else if (backbone == "swin_t")
    e.impl_ = make_swin_t(rng);
  else
    fail("teacher: unknown backbone '" + backbone +
         "' (expected toy_cnn, toy_attn, wide_resnet50, or swin_t)");
  e.impl_->backbone_id = backbone;

  if (!weights_source.empty() && weights_source != "scratch") {
    io::Container c = io::load_container(weights_source);
    HT_CHECK(c.meta.contains("architecture") && c.meta["architecture"] == backbone,
             "teacher: weights file " + weights_source + " declares architecture '" +
                 (c.meta.contains("architecture") ? c.meta["architecture"].get<std::string>()
                                                  : std::string("?")) +
                 "' but '" + backbone + "' was requested");
    size_t used = 0;
    for (auto& [name, t] : e.impl_->store.items()) {
      HT_CHECK(c.has(name), "teacher: weights file is missing parameter '" + name + "'");
      const Tensor& src = c.array(name);
      HT_CHECK(src.shape() == t.shape(),
               "teacher: parameter '" + name + "' has shape " + shape_str(src.shape()) +
                   " in the weights file but the architecture expects " + shape_str(t.shape()));
      t = src;
      ++used;
    }
    HT_CHECK(used == c.arrays.size(),
             "teacher: weights file contains " + std::to_string(c.arrays.size() - used) +
                 " arrays the architecture does not declare");
  }
  return e;
}

Encoder::Kind Encoder::kind() const { return impl_->kind; }
const std::string& Encoder::backbone() const { return impl_->backbone_id; }
const std::vector<StageSpec>& Encoder::stages() const { return impl_->specs; }

Pyramid Encoder::extract(const Tensor& batch, const std::vector<int>& layers_used) const {
  HT_CHECK(batch.ndim() == 4 && batch.dim(1) == 3,
           "teacher: extract expects (B,3,S,S), got " + shape_str(batch.shape()));
  const int64_t deepest = impl_->specs.back().stride;
  HT_CHECK(batch.dim(2) % deepest == 0 && batch.dim(3) % deepest == 0,
           "teacher: input size " + std::to_string(batch.dim(2)) +
               " is not divisible by the deepest stage stride " + std::to_string(deepest));
  const std::vector<Tensor> all = impl_->forward(batch);
  Pyramid out;
  for (int k : layers_used) {
    HT_CHECK(k >= 1 && k <= static_cast<int>(all.size()),
             "teacher: stage index " + std::to_string(k) + " out of range");
    out.emplace(k, all[static_cast<size_t>(k - 1)]);
  }
  return out;
}

int64_t Encoder::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : impl_->store.items()) n += t.numel();
  return n;
}

uint32_t Encoder::param_checksum() const {
  uint32_t crc = 0;
  for (const auto& [name, t] : impl_->store.items()) {
    crc = io::crc32(name.data(), name.size(), crc);
    crc = io::crc32(t.data(), static_cast<size_t>(t.numel()) * sizeof(double), crc);
  }
  return crc;
}

void Encoder::save_weights(const std::string& path) const {
  io::Container c;
  c.meta["architecture"] = impl_->backbone_id;
  c.meta["kind"] = impl_->kind == Kind::kCnnLocal ? "cnn_local" : "attn_global";
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& s : impl_->specs)
    specs.push_back({{"channels", s.channels}, {"stride", s.stride}});
  c.meta["stages"] = specs;
  for (const auto& [name, t] : impl_->store.items()) c.add(name, t);
  io::save_container(path, c);
}

Tensor align_global(const Tensor& f, int64_t target_h, int64_t target_w) {
  HT_CHECK(target_h > 0 && target_w > 0, "align_global: zero-sized target");
  return img::resize_bilinear(f, target_h, target_w);
}

}  // namespace hetnet::teacher
