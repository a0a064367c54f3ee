#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hetnet/tensor.hpp"

namespace hetnet::teacher {

struct StageSpec {
  int64_t channels = 0;
  int64_t stride = 0;
};

// Stage outputs keyed by 1-based stage index.
using Pyramid = std::map<int, Tensor>;

// A frozen feature encoder. Parameters are plain tensors that never receive
// gradients; extract is a pure function of (weights, input).
class Encoder {
 public:
  enum class Kind { kCnnLocal, kAttnGlobal };

  // backbone: toy_cnn | toy_attn | wide_resnet50 | swin_t.
  // weights_source: "scratch" (or empty) for seed-derived initialization,
  // otherwise a weights-container path.
  static Encoder load(const std::string& backbone, const std::string& weights_source,
                      uint64_t seed);

  Kind kind() const;
  const std::string& backbone() const;
  const std::vector<StageSpec>& stages() const;

  // Runs the frozen forward pass and returns the requested stage maps,
  // each (B, C_k, S/stride_k, S/stride_k).
  Pyramid extract(const Tensor& batch, const std::vector<int>& layers_used) const;

  int64_t param_count() const;
  // Checksum over all parameters in registration order; unchanged by any
  // amount of downstream training.
  uint32_t param_checksum() const;
  void save_weights(const std::string& path) const;

 private:
  std::shared_ptr<class EncoderImpl> impl_;
};

// Bilinear resample of the trailing spatial dims to (target_h, target_w);
// channels untouched. Identity when sizes already match.
Tensor align_global(const Tensor& f, int64_t target_h, int64_t target_w);

}  // namespace hetnet::teacher
