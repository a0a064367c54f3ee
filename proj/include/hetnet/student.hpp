#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetnet/autodiff.hpp"
#include "hetnet/nn.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/teacher.hpp"

namespace hetnet::student {

// Bottleneck + reversed decoder. Compresses the fused multi-scale feature
// to a one-class embedding at half the deepest spatial size, then decodes
// back up the local teacher's stage ladder, emitting one map per used
// layer with exactly the teacher's stage shape. Both training branches
// call the same instance, so parameter sharing is structural.
class StudentNetwork {
 public:
  StudentNetwork() = default;
  StudentNetwork(nn::ParamStore& ps, const std::string& prefix,
                 const std::vector<teacher::StageSpec>& local_stages,
                 const std::vector<int>& layers_used, int64_t in_channels, RngStream& rng);

  std::map<int, ad::Var> operator()(const ad::Var& fused, bool training) const;

  int64_t embedding_channels() const { return emb_channels_; }
  int64_t in_channels() const { return in_channels_; }

 private:
  struct ResBlock {
    nn::Conv2d c1, c2, shortcut_c;
    nn::ConvTranspose2d t1, shortcut_t;
    nn::BatchNorm2d b1, b2, bs;
    bool transposed = false;
  };

  ad::Var run_block(const ResBlock& blk, const ad::Var& x, bool training) const;

  ResBlock oce_;
  std::vector<ResBlock> stages_;   // deepest-first
  std::vector<int> stage_layers_;  // teacher layer index per decoder stage
  std::vector<int> layers_used_;
  int64_t in_channels_ = 0;
  int64_t emb_channels_ = 0;
};

}  // namespace hetnet::student
