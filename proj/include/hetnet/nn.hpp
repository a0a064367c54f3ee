#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hetnet/autodiff.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::nn {

// Ordered registry of trainable parameters and persistent buffers (batch
// norm running stats). Registration order is the iteration order used by
// the optimizer and serialization, so it is part of the determinism story.
class ParamStore {
 public:
  ad::Var param(const std::string& name, Tensor init);
  std::shared_ptr<Tensor> buffer(const std::string& name, Tensor init);

  const std::vector<std::pair<std::string, ad::Var>>& params() const { return params_; }
  const std::vector<std::pair<std::string, std::shared_ptr<Tensor>>>& buffers() const {
    return buffers_;
  }
  ad::Var find_param(const std::string& name) const;
  int64_t param_count() const;

 private:
  std::vector<std::pair<std::string, ad::Var>> params_;
  std::vector<std::pair<std::string, std::shared_ptr<Tensor>>> buffers_;
};

struct Conv2d {
  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& name, int64_t cin, int64_t cout, int kernel,
         int stride, int pad, bool bias, RngStream& rng);
  ad::Var operator()(const ad::Var& x) const { return ad::conv2d(x, w, b, stride, pad); }
  ad::Var w, b;
  int stride = 1, pad = 0;
};

struct ConvTranspose2d {
  ConvTranspose2d() = default;
  ConvTranspose2d(ParamStore& ps, const std::string& name, int64_t cin, int64_t cout, int kernel,
                  int stride, int pad, bool bias, RngStream& rng);
  ad::Var operator()(const ad::Var& x) const {
    return ad::conv_transpose2d(x, w, b, stride, pad);
  }
  ad::Var w, b;
  int stride = 1, pad = 0;
};

struct BatchNorm2d {
  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& ps, const std::string& name, int64_t channels);
  ad::Var operator()(const ad::Var& x, bool training) const {
    return ad::batch_norm2d(x, gamma, beta, *running_mean, *running_var, training, momentum, eps);
  }
  ad::Var gamma, beta;
  std::shared_ptr<Tensor> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

// First/second-moment adaptive update with bias correction. Step order
// follows parameter registration order.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, double lr, double beta1, double beta2, double eps = 1e-8);

  void zero_grad();
  void step();

  int64_t steps_taken() const { return t_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  // Restores moment buffers and step counter from a checkpoint.
  void load_state(std::vector<Tensor> m, std::vector<Tensor> v, int64_t t);

 private:
  std::vector<ad::Var> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace hetnet::nn
