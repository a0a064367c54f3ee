#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hetnet/common.hpp"

namespace hetnet {

class RngStream;

// Dense row-major double tensor. Owns its storage; shape is a plain dim
// vector with no stride tricks, so reshapes that keep numel are free on
// rvalues and a copy otherwise.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }
  Tensor(std::vector<int64_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    HT_ASSERT(count(shape_) == static_cast<int64_t>(data_.size()),
              "tensor data size does not match shape");
  }

  static Tensor full(std::vector<int64_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const {
    HT_ASSERT(i >= 0 && i < ndim(), "tensor dim index out of range");
    return shape_[static_cast<size_t>(i)];
  }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double& at(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double at(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double& at(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  double at(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  void fill(double v) { data_.assign(data_.size(), v); }
  void zero() { fill(0.0); }

  Tensor reshaped(std::vector<int64_t> new_shape) const& {
    HT_ASSERT(count(new_shape) == numel(), "reshape changes element count");
    return Tensor(std::move(new_shape), data_);
  }
  Tensor reshaped(std::vector<int64_t> new_shape) && {
    HT_ASSERT(count(new_shape) == numel(), "reshape changes element count");
    return Tensor(std::move(new_shape), std::move(data_));
  }

 private:
  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      HT_ASSERT(d >= 0, "negative tensor dimension");
      n *= d;
    }
    return n;
  }

  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<int64_t>& shape);

Tensor randn(std::vector<int64_t> shape, RngStream& rng);
Tensor rand_uniform(std::vector<int64_t> shape, RngStream& rng, double lo, double hi);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace hetnet
