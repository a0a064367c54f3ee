#include "hetnet/nn.hpp"

#include <cmath>

namespace hetnet::nn {

ad::Var ParamStore::param(const std::string& name, Tensor init) {
  for (const auto& [n, v] : params_) HT_ASSERT(n != name, "duplicate parameter name " + name);
  ad::Var v = ad::Var::param(std::move(init));
  params_.emplace_back(name, v);
  return v;
}

std::shared_ptr<Tensor> ParamStore::buffer(const std::string& name, Tensor init) {
  for (const auto& [n, v] : buffers_) HT_ASSERT(n != name, "duplicate buffer name " + name);
  auto t = std::make_shared<Tensor>(std::move(init));
  buffers_.emplace_back(name, t);
  return t;
}

ad::Var ParamStore::find_param(const std::string& name) const {
  for (const auto& [n, v] : params_) {
    if (n == name) return v;
  }
  fail("unknown parameter " + name);
}

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (const auto& [name, v] : params_) n += v.value().numel();
  return n;
}

namespace {

// Zero-mean normal weights scaled by the receptive fan-in, biases zero.
Tensor conv_weight(std::vector<int64_t> shape, int64_t fan_in, RngStream& rng) {
  Tensor w = randn(std::move(shape), rng);
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] *= std;
  return w;
}

}  // namespace

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int64_t cin, int64_t cout, int kernel,
               int stride_, int pad_, bool bias, RngStream& rng)
    : stride(stride_), pad(pad_) {
  w = ps.param(name + ".weight", conv_weight({cout, cin, kernel, kernel},
                                             cin * kernel * kernel, rng));
  if (bias) b = ps.param(name + ".bias", Tensor({cout}));
}

ConvTranspose2d::ConvTranspose2d(ParamStore& ps, const std::string& name, int64_t cin,
                                 int64_t cout, int kernel, int stride_, int pad_, bool bias,
                                 RngStream& rng)
    : stride(stride_), pad(pad_) {
  w = ps.param(name + ".weight", conv_weight({cin, cout, kernel, kernel},
                                             cin * kernel * kernel, rng));
  if (bias) b = ps.param(name + ".bias", Tensor({cout}));
}

BatchNorm2d::BatchNorm2d(ParamStore& ps, const std::string& name, int64_t channels) {
  gamma = ps.param(name + ".weight", Tensor::full({channels}, 1.0));
  beta = ps.param(name + ".bias", Tensor({channels}));
  running_mean = ps.buffer(name + ".running_mean", Tensor({channels}));
  running_var = ps.buffer(name + ".running_var", Tensor::full({channels}, 1.0));
}

Adam::Adam(std::vector<ad::Var> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.value().shape());
    v_.emplace_back(p.value().shape());
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].value();
    const Tensor& g = params_[i].grad();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < p.numel(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::load_state(std::vector<Tensor> m, std::vector<Tensor> v, int64_t t) {
  HT_CHECK(m.size() == params_.size() && v.size() == params_.size(),
           "optimizer state does not match parameter count");
  for (size_t i = 0; i < params_.size(); ++i) {
    HT_CHECK(m[i].numel() == params_[i].value().numel() &&
                 v[i].numel() == params_[i].value().numel(),
             "optimizer state shape mismatch");
  }
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace hetnet::nn
