#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetnet/autodiff.hpp"
#include "hetnet/nn.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::fusion {

// Intermediates of one ALGF forward, recomputed with the same kernels the
// graph uses so values match bitwise. probs holds one row-stochastic
// (HW,HW) matrix per (batch, head), batch-major.
struct AlgfTrace {
  Tensor q, k, v;    // (B,HW,C_k) projected tokens
  Tensor attn_out;   // (B,HW,C_k)
  std::vector<Tensor> probs;
};

// Per-layer local/global fusion: aligns both inputs to C_k channels,
// attends with the local tokens as query/value and global tokens as key,
// expands to 2C_k, and fuses with the concatenated alignment.
class ALGFBlock {
 public:
  ALGFBlock() = default;
  ALGFBlock(nn::ParamStore& ps, const std::string& name, int64_t c_local, int64_t c_global,
            int heads, RngStream& rng);

  ad::Var operator()(const ad::Var& f_local, const ad::Var& f_global,
                     AlgfTrace* trace = nullptr) const;

  // Ablation path: channel-aligned local features, global branch unused.
  ad::Var bypass(const ad::Var& f_local) const;

  int64_t out_channels() const { return c_k_; }

 private:
  nn::Conv2d align_local_, align_global_, q_, k_, v_, expand_, fuse_;
  int heads_ = 1;
  int64_t c_k_ = 0;
};

// Downsamples every shallow fused map to the deepest spatial size with
// stride-2 conv+BN+ReLU stages and concatenates shallowest-first. The
// deepest layer passes through untouched.
class MHFModule {
 public:
  struct LayerSpec {
    int layer = 0;
    int64_t channels = 0;
    int64_t factor = 1;  // spatial size relative to the deepest layer
  };

  MHFModule() = default;
  MHFModule(nn::ParamStore& ps, const std::string& name, const std::vector<LayerSpec>& layers,
            RngStream& rng);

  ad::Var operator()(const std::map<int, ad::Var>& o, bool training) const;

  int64_t out_channels() const { return out_channels_; }

 private:
  struct Stage {
    nn::Conv2d conv;
    nn::BatchNorm2d bn;
  };
  std::vector<LayerSpec> specs_;
  std::vector<std::vector<Stage>> chains_;
  int64_t out_channels_ = 0;
};

}  // namespace hetnet::fusion
