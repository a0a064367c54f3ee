#pragma once

#include <cmath>
#include <deque>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hetnet/autodiff.hpp"
#include "hetnet/common.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/teacher.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::teacher {

// Named frozen tensors. A deque keeps references stable as layers register.
class TensorStore {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    HT_ASSERT(!find(name), "duplicate teacher tensor " + name);
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }
  Tensor* find(const std::string& name) {
    for (auto& [n, t] : items_)
      if (n == name) return &t;
    return nullptr;
  }
  const std::deque<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::deque<std::pair<std::string, Tensor>>& items() { return items_; }

 private:
  std::deque<std::pair<std::string, Tensor>> items_;
};

class EncoderImpl {
 public:
  virtual ~EncoderImpl() = default;
  // All stage outputs, index 0 = stage 1.
  virtual std::vector<Tensor> forward(const Tensor& batch) const = 0;

  TensorStore store;
  std::vector<StageSpec> specs;
  std::string backbone_id;
  Encoder::Kind kind = Encoder::Kind::kCnnLocal;
};

std::shared_ptr<EncoderImpl> make_toy_cnn(RngStream& rng);
std::shared_ptr<EncoderImpl> make_toy_attn(RngStream& rng);
std::shared_ptr<EncoderImpl> make_wide_resnet50(RngStream& rng);
std::shared_ptr<EncoderImpl> make_swin_t(RngStream& rng);

// Frozen layer helpers. Wrapping weights as constants keeps the tape free
// of backward closures, so teacher forwards allocate no gradient state.

inline Tensor he_conv_init(int64_t cout, int64_t cin, int64_t kh, int64_t kw, RngStream& rng) {
  Tensor w({cout, cin, kh, kw});
  const double sd = std::sqrt(2.0 / static_cast<double>(cin * kh * kw));
  for (int64_t i = 0; i < w.numel(); ++i) w.data()[i] = sd * rng.normal();
  return w;
}

struct FConv {
  const Tensor* w = nullptr;
  const Tensor* b = nullptr;
  int stride = 1, pad = 0;

  FConv() = default;
  FConv(TensorStore& ts, const std::string& name, int64_t cin, int64_t cout, int k, int stride_,
        int pad_, RngStream& rng)
      : stride(stride_), pad(pad_) {
    w = &ts.add(name + ".weight", he_conv_init(cout, cin, k, k, rng));
    b = &ts.add(name + ".bias", Tensor({cout}));
  }
  ad::Var operator()(const ad::Var& x) const {
    return ad::conv2d(x, ad::Var::constant(*w), ad::Var::constant(*b), stride, pad);
  }
};

struct FBatchNorm {
  const Tensor* gamma = nullptr;
  const Tensor* beta = nullptr;
  Tensor* mean = nullptr;
  Tensor* var = nullptr;

  FBatchNorm() = default;
  FBatchNorm(TensorStore& ts, const std::string& name, int64_t c) {
    gamma = &ts.add(name + ".weight", Tensor::full({c}, 1.0));
    beta = &ts.add(name + ".bias", Tensor({c}));
    mean = &ts.add(name + ".running_mean", Tensor({c}));
    var = &ts.add(name + ".running_var", Tensor::full({c}, 1.0));
  }
  // Teachers always run with evaluation statistics.
  ad::Var operator()(const ad::Var& x) const {
    return ad::batch_norm2d(x, ad::Var::constant(*gamma), ad::Var::constant(*beta), *mean, *var,
                            false, 0.1, 1e-5);
  }
};

}  // namespace hetnet::teacher
