#include "hetnet/rng.hpp"

#include <cmath>

namespace hetnet {
namespace {

constexpr double kPi = 3.14159265358979323846;

inline uint64_t splitmix64(uint64_t& s) {
  uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  uint64_t s = h;
  return splitmix64(s);
}

inline uint64_t mix_str(uint64_t h, std::string_view tag) {
  // FNV-1a over the tag bytes, folded into the running key.
  uint64_t f = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    f ^= c;
    f *= 0x100000001b3ULL;
  }
  return mix(h, f);
}

}  // namespace

RngStream::RngStream(uint64_t key) : state_(key) {
  // Burn a few outputs so near-identical keys decorrelate immediately.
  splitmix64(state_);
  splitmix64(state_);
}

uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
  if (hi <= lo) return lo;
  const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
  const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<int64_t>(v % range);
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * kPi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

uint64_t derive_key(uint64_t seed, std::initializer_list<std::string_view> tags) {
  uint64_t h = mix(0x8f1bbcdcbfa53e0bULL, seed);
  for (auto t : tags) h = mix_str(h, t);
  return h;
}

uint64_t derive_key(uint64_t seed, std::string_view tag) {
  return derive_key(seed, {tag});
}

uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a) {
  return mix(derive_key(seed, {tag}), a);
}

uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b) {
  return mix(mix(derive_key(seed, {tag}), a), b);
}

uint64_t derive_key(uint64_t seed, std::string_view tag, uint64_t a, uint64_t b, uint64_t c) {
  return mix(mix(mix(derive_key(seed, {tag}), a), b), c);
}

}  // namespace hetnet
