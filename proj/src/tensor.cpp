#include "hetnet/tensor.hpp"

#include <cmath>

#include "hetnet/rng.hpp"

namespace hetnet {

std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor randn(std::vector<int64_t> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();
  return t;
}

Tensor rand_uniform(std::vector<int64_t> shape, RngStream& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  HT_ASSERT(a.same_shape(b), "max_abs_diff shape mismatch");
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

}  // namespace hetnet
