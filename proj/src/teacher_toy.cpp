#include <cmath>

#include "hetnet/autodiff.hpp"
#include "teacher_impl.hpp"

namespace hetnet::teacher {

namespace {

// Three stages of (stride-2 conv, refine conv), channels 16/32/64, so the
// pyramid sits at strides 2/4/8.
class ToyCnn : public EncoderImpl {
 public:
  explicit ToyCnn(RngStream& rng) {
    kind = Encoder::Kind::kCnnLocal;
    specs = {{16, 2}, {32, 4}, {64, 8}};
    int64_t cin = 3;
    for (int s = 0; s < 3; ++s) {
      const std::string base = "stage" + std::to_string(s + 1);
      const int64_t cout = specs[static_cast<size_t>(s)].channels;
      down_[s] = FConv(store, base + ".down", cin, cout, 3, 2, 1, rng);
      down_bn_[s] = FBatchNorm(store, base + ".down_bn", cout);
      refine_[s] = FConv(store, base + ".refine", cout, cout, 3, 1, 1, rng);
      refine_bn_[s] = FBatchNorm(store, base + ".refine_bn", cout);
      cin = cout;
    }
  }

  std::vector<Tensor> forward(const Tensor& batch) const override {
    ad::Var x = ad::Var::constant(batch);
    std::vector<Tensor> out;
    for (int s = 0; s < 3; ++s) {
      x = ad::relu(down_bn_[s](down_[s](x)));
      x = ad::relu(refine_bn_[s](refine_[s](x)));
      out.push_back(x.value());
    }
    return out;
  }

 private:
  FConv down_[3], refine_[3];
  FBatchNorm down_bn_[3], refine_bn_[3];
};

// One full-attention transformer block: token attention plus a pointwise
// feed-forward, both residual.
struct ToyBlock {
  FConv q, k, v, proj, fc1, fc2;
  int heads = 1;
  int64_t channels = 0;

  ToyBlock() = default;
  ToyBlock(TensorStore& ts, const std::string& base, int64_t c, int heads_, RngStream& rng)
      : q(ts, base + ".q", c, c, 1, 1, 0, rng),
        k(ts, base + ".k", c, c, 1, 1, 0, rng),
        v(ts, base + ".v", c, c, 1, 1, 0, rng),
        proj(ts, base + ".proj", c, c, 1, 1, 0, rng),
        fc1(ts, base + ".fc1", c, 2 * c, 1, 1, 0, rng),
        fc2(ts, base + ".fc2", 2 * c, c, 1, 1, 0, rng),
        heads(heads_),
        channels(c) {}

  ad::Var operator()(const ad::Var& x) const {
    const int64_t H = x.value().dim(2), W = x.value().dim(3);
    const double scale = 1.0 / std::sqrt(static_cast<double>(channels / heads));
    auto qt = ad::tokens_from_chw(q(x));
    auto kt = ad::tokens_from_chw(k(x));
    auto vt = ad::tokens_from_chw(v(x));
    auto at = ad::chw_from_tokens(ad::attention(qt, kt, vt, heads, scale), H, W);
    auto y = ad::add(x, proj(at));
    return ad::add(y, fc2(ad::relu(fc1(y))));
  }
};

// Patch embedding at stride 4, then per-stage attention blocks separated by
// stride-2 merges: dims 16/32/64 at strides 4/8/16.
class ToyAttn : public EncoderImpl {
 public:
  explicit ToyAttn(RngStream& rng) {
    kind = Encoder::Kind::kAttnGlobal;
    specs = {{16, 4}, {32, 8}, {64, 16}};
    embed_ = FConv(store, "embed", 3, 16, 4, 4, 0, rng);
    block_[0] = ToyBlock(store, "stage1.block", 16, 2, rng);
    merge_[0] = FConv(store, "stage2.merge", 16, 32, 2, 2, 0, rng);
    block_[1] = ToyBlock(store, "stage2.block", 32, 4, rng);
    merge_[1] = FConv(store, "stage3.merge", 32, 64, 2, 2, 0, rng);
    block_[2] = ToyBlock(store, "stage3.block", 64, 8, rng);
  }

  std::vector<Tensor> forward(const Tensor& batch) const override {
    ad::Var x = ad::Var::constant(batch);
    x = embed_(x);
    std::vector<Tensor> out;
    for (int s = 0; s < 3; ++s) {
      if (s > 0) x = merge_[s - 1](x);
      x = block_[s](x);
      out.push_back(x.value());
    }
    return out;
  }

 private:
  FConv embed_;
  ToyBlock block_[3];
  FConv merge_[2];
};

}  // namespace

std::shared_ptr<EncoderImpl> make_toy_cnn(RngStream& rng) {
  return std::make_shared<ToyCnn>(rng);
}
std::shared_ptr<EncoderImpl> make_toy_attn(RngStream& rng) {
  return std::make_shared<ToyAttn>(rng);
}

}  // namespace hetnet::teacher
