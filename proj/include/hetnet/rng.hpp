#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace hetnet {

// Deterministic, stdlib-independent RNG. Every consumer derives its own
// stream from (seed, tag path), so modules never share generator state and
// reordering one consumer cannot perturb another. Streams are cheap to
// construct; nothing about them needs to be serialized - checkpoints only
// store the integer counters (epoch, step) a stream key is derived from.
class RngStream {
 public:
  explicit RngStream(uint64_t key);

  uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in [lo, hi] inclusive, unbiased (rejection sampling).
  int64_t uniform_int(int64_t lo, int64_t hi);
  // Standard normal via Box-Muller; pairs are cached.
  double normal();

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Key derivation: mixes the base seed with a path of string / integer tags.
uint64_t derive_key(uint64_t seed, std::initializer_list<std::string_view> tags);
uint64_t derive_key(uint64_t seed, std::string_view tag);
uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a);
uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b);
uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b, uint64_t c);

}  // namespace hetnet
