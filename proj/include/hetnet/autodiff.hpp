#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hetnet/tensor.hpp"

namespace hetnet::ad {

// Tape node. Ops allocate one node per output; backward_fn reads this
// node's grad and accumulates (+=) into the grads of its inputs, so a
// parameter used by several branches collects every contribution.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.numel() != value.numel()) grad = Tensor(value.shape());
  }
};

using NodePtr = std::shared_ptr<Node>;

// Value-semantic handle to a node. Parameters are long-lived leaf Vars;
// each forward pass hangs a fresh graph off them.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}
  Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    if (requires_grad) node_->ensure_grad();
  }

  static Var constant(Tensor v) { return Var(std::move(v), false); }
  static Var param(Tensor v) { return Var(std::move(v), true); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() {
    node_->ensure_grad();
    node_->grad.zero();
  }
  const NodePtr& node() const { return node_; }

  // Leaf copy of the current value, cut loose from the graph.
  Var detached() const { return constant(node_->value); }

 private:
  NodePtr node_;
};

// Reverse pass from root. Seeds root.grad with ones; leaf grads accumulate,
// so persistent parameters must be zeroed between steps by the optimizer.
void backward(const Var& root);

Var add(const Var& a, const Var& b);
Var affine(const Var& x, double a, double c);  // a*x + c
inline Var mul_scalar(const Var& x, double a) { return affine(x, a, 0.0); }
Var relu(const Var& x);

// (B,C_i,H,W) inputs joined along the channel axis in argument order.
Var concat_channels(const std::vector<Var>& xs);

// x (B,Cin,H,W), w (Cout,Cin,kh,kw), optional b (Cout).
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// x (B,Cin,H,W), w (Cin,Cout,kh,kw), optional b (Cout).
// Output spatial: (H-1)*stride - 2*pad + k.
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// Training mode normalizes with batch statistics (biased variance) and
// updates the running stats in place (unbiased variance); eval mode
// normalizes with the running stats and leaves them untouched.
Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, double momentum, double eps);

Var tokens_from_chw(const Var& x);                           // (B,C,H,W) -> (B,H*W,C)
Var chw_from_tokens(const Var& x, int64_t H, int64_t W);     // (B,H*W,C) -> (B,C,H,W)

// q (B,Lq,C), k/v (B,Lk,C), C divisible by heads.
// Per head: softmax(scale * Q K^T) V.
Var attention(const Var& q, const Var& k, const Var& v, int heads, double scale);

// Per-position cosine similarity between matching feature vectors along the
// channel axis, with delta added to the denominator so zero vectors stay
// finite. teacher must not require grad. Output (B,H,W).
Var cosine_map(const Var& teacher, const Var& student, double delta);

Var mean_all(const Var& x);  // -> {1}

}  // namespace hetnet::ad
