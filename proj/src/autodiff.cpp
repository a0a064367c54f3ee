#include "hetnet/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>
#include <utility>

#include "hetnet/kernels.hpp"

namespace hetnet::ad {
namespace {

Var make_node(Tensor value, std::vector<NodePtr> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs) {
    if (in->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  // Constant subgraphs never run backward, so the capture (and anything the
  // lambda holds alive) can be dropped immediately.
  if (n->requires_grad) n->backward_fn = std::move(fn);
  return Var(n);
}

// Unpacks x (C,H,W) into cols (C*kh*kw, Ho*Wo) for a stride/pad window grid;
// out-of-image taps become zeros.
void im2col(const double* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, double* cols) {
  const int64_t L = Ho * Wo;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        double* row = cols + ((c * kh + ki) * kw + kj) * L;
        for (int64_t oi = 0; oi < Ho; ++oi) {
          const int64_t ii = oi * stride - pad + ki;
          double* dst = row + oi * Wo;
          if (ii < 0 || ii >= H) {
            std::memset(dst, 0, sizeof(double) * static_cast<size_t>(Wo));
            continue;
          }
          const double* src = x + (c * H + ii) * W;
          for (int64_t oj = 0; oj < Wo; ++oj) {
            const int64_t jj = oj * stride - pad + kj;
            dst[oj] = (jj >= 0 && jj < W) ? src[jj] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds cols back into x (C,H,W).
void col2im_add(const double* cols, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t Ho, int64_t Wo, double* x) {
  const int64_t L = Ho * Wo;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const double* row = cols + ((c * kh + ki) * kw + kj) * L;
        for (int64_t oi = 0; oi < Ho; ++oi) {
          const int64_t ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= H) continue;
          double* dst = x + (c * H + ii) * W;
          const double* src = row + oi * Wo;
          for (int64_t oj = 0; oj < Wo; ++oj) {
            const int64_t jj = oj * stride - pad + kj;
            if (jj >= 0 && jj < W) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

}  // namespace

void backward(const Var& root) {
  const NodePtr& r = root.node();
  HT_ASSERT(r != nullptr, "backward on an undefined Var");
  HT_ASSERT(r->requires_grad, "backward on a graph with no trainable inputs");
  r->ensure_grad();
  r->grad.fill(1.0);

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(r.get(), 0);
  visited.insert(r.get());
  while (!stack.empty()) {
    Node* n = stack.back().first;
    size_t& idx = stack.back().second;
    if (idx < n->inputs.size()) {
      Node* child = n->inputs[idx].get();
      ++idx;
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward_fn) continue;
    for (const auto& in : n->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    n->backward_fn(*n);
  }
}

Var add(const Var& a, const Var& b) {
  HT_ASSERT(a.value().same_shape(b.value()), "add shape mismatch");
  Tensor out(a.value().shape());
  kern::vadd(out.numel(), a.value().data(), b.value().data(), out.data());
  return make_node(std::move(out), {a.node(), b.node()}, [](Node& n) {
    const int64_t m = n.value.numel();
    for (int i = 0; i < 2; ++i) {
      Node& in = *n.inputs[static_cast<size_t>(i)];
      if (in.requires_grad) kern::vadd(m, in.grad.data(), n.grad.data(), in.grad.data());
    }
  });
}

Var affine(const Var& x, double a, double c) {
  Tensor out(x.value().shape());
  const int64_t m = out.numel();
  kern::vshift(m, x.value().data(), 0.0, out.data());
  kern::scale(m, a, out.data());
  kern::vshift(m, out.data(), c, out.data());
  return make_node(std::move(out), {x.node()}, [a](Node& n) {
    Node& in = *n.inputs[0];
    if (in.requires_grad) kern::axpy(n.value.numel(), a, n.grad.data(), in.grad.data());
  });
}

Var relu(const Var& x) {
  Tensor out(x.value().shape());
  kern::relu_fwd(out.numel(), x.value().data(), out.data());
  return make_node(std::move(out), {x.node()}, [](Node& n) {
    Node& in = *n.inputs[0];
    if (in.requires_grad) {
      kern::relu_bwd(n.value.numel(), in.value.data(), n.grad.data(), in.grad.data());
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  HT_ASSERT(!xs.empty(), "concat_channels with no inputs");
  const Tensor& first = xs[0].value();
  HT_ASSERT(first.ndim() == 4, "concat_channels expects (B,C,H,W)");
  const int64_t B = first.dim(0), H = first.dim(2), W = first.dim(3);
  int64_t Ctot = 0;
  std::vector<NodePtr> inputs;
  inputs.reserve(xs.size());
  for (const Var& x : xs) {
    const Tensor& v = x.value();
    HT_ASSERT(v.ndim() == 4 && v.dim(0) == B && v.dim(2) == H && v.dim(3) == W,
              "concat_channels inputs disagree on batch or spatial dims");
    Ctot += v.dim(1);
    inputs.push_back(x.node());
  }
  Tensor out({B, Ctot, H, W});
  const int64_t plane = H * W;
  for (int64_t b = 0; b < B; ++b) {
    double* dst = out.data() + b * Ctot * plane;
    for (const Var& x : xs) {
      const Tensor& v = x.value();
      const int64_t n = v.dim(1) * plane;
      std::memcpy(dst, v.data() + b * n, sizeof(double) * static_cast<size_t>(n));
      dst += n;
    }
  }
  return make_node(std::move(out), std::move(inputs), [B, Ctot, plane](Node& n) {
    for (int64_t b = 0; b < B; ++b) {
      const double* src = n.grad.data() + b * Ctot * plane;
      for (const auto& inp : n.inputs) {
        const int64_t m = inp->value.dim(1) * plane;
        if (inp->requires_grad) {
          double* g = inp->grad.data() + b * m;
          kern::vadd(m, g, src, g);
        }
        src += m;
      }
    }
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  HT_ASSERT(xv.ndim() == 4 && wv.ndim() == 4, "conv2d expects 4-d input and weight");
  HT_ASSERT(xv.dim(1) == wv.dim(1), "conv2d channel mismatch");
  HT_ASSERT(stride >= 1 && pad >= 0, "conv2d bad stride/pad");
  const int64_t B = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int64_t Co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
  const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
  HT_ASSERT(Ho >= 1 && Wo >= 1, "conv2d kernel larger than padded input");
  const bool has_bias = b.defined();
  if (has_bias) HT_ASSERT(b.value().ndim() == 1 && b.value().dim(0) == Co, "conv2d bias shape");

  const int64_t R = Ci * kh * kw;
  const int64_t L = Ho * Wo;
  Tensor out({B, Co, Ho, Wo});
  Tensor cols({R, L});
  for (int64_t bi = 0; bi < B; ++bi) {
    im2col(xv.data() + bi * Ci * H * W, Ci, H, W, kh, kw, stride, pad, Ho, Wo, cols.data());
    double* ob = out.data() + bi * Co * L;
    kern::gemm_nn(Co, R, L, wv.data(), R, cols.data(), L, ob, L);
    if (has_bias) {
      for (int64_t c = 0; c < Co; ++c) {
        kern::vshift(L, ob + c * L, b.value()[c], ob + c * L);
      }
    }
  }

  std::vector<NodePtr> inputs = {x.node(), w.node()};
  if (has_bias) inputs.push_back(b.node());
  auto fn = [=](Node& n) {
    Node& xn = *n.inputs[0];
    Node& wn = *n.inputs[1];
    Tensor cols2({R, L});
    Tensor dcols({R, L});
    for (int64_t bi = 0; bi < B; ++bi) {
      const double* dyb = n.grad.data() + bi * Co * L;
      if (wn.requires_grad) {
        im2col(xn.value.data() + bi * Ci * H * W, Ci, H, W, kh, kw, stride, pad, Ho, Wo,
               cols2.data());
        kern::gemm_nt(Co, L, R, dyb, L, cols2.data(), L, wn.grad.data(), R, true);
      }
      if (xn.requires_grad) {
        kern::gemm_tn(R, Co, L, wn.value.data(), R, dyb, L, dcols.data(), L, false);
        col2im_add(dcols.data(), Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                   xn.grad.data() + bi * Ci * H * W);
      }
      if (has_bias && n.inputs[2]->requires_grad) {
        for (int64_t c = 0; c < Co; ++c) {
          n.inputs[2]->grad[c] += kern::sum(L, dyb + c * L);
        }
      }
    }
  };
  return make_node(std::move(out), std::move(inputs), std::move(fn));
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  HT_ASSERT(xv.ndim() == 4 && wv.ndim() == 4, "conv_transpose2d expects 4-d input and weight");
  HT_ASSERT(xv.dim(1) == wv.dim(0), "conv_transpose2d channel mismatch");
  HT_ASSERT(stride >= 1 && pad >= 0, "conv_transpose2d bad stride/pad");
  const int64_t B = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int64_t Co = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
  const int64_t Ho = (H - 1) * stride - 2 * pad + kh;
  const int64_t Wo = (W - 1) * stride - 2 * pad + kw;
  HT_ASSERT(Ho >= 1 && Wo >= 1, "conv_transpose2d degenerate output");
  const bool has_bias = b.defined();
  if (has_bias) {
    HT_ASSERT(b.value().ndim() == 1 && b.value().dim(0) == Co, "conv_transpose2d bias shape");
  }

  const int64_t R = Co * kh * kw;
  const int64_t L = H * W;
  Tensor out({B, Co, Ho, Wo});
  Tensor cols({R, L});
  for (int64_t bi = 0; bi < B; ++bi) {
    kern::gemm_tn(R, Ci, L, wv.data(), R, xv.data() + bi * Ci * L, L, cols.data(), L, false);
    double* ob = out.data() + bi * Co * Ho * Wo;
    col2im_add(cols.data(), Co, Ho, Wo, kh, kw, stride, pad, H, W, ob);
    if (has_bias) {
      for (int64_t c = 0; c < Co; ++c) {
        kern::vshift(Ho * Wo, ob + c * Ho * Wo, b.value()[c], ob + c * Ho * Wo);
      }
    }
  }

  std::vector<NodePtr> inputs = {x.node(), w.node()};
  if (has_bias) inputs.push_back(b.node());
  auto fn = [=](Node& n) {
    Node& xn = *n.inputs[0];
    Node& wn = *n.inputs[1];
    Tensor dcols({R, L});
    for (int64_t bi = 0; bi < B; ++bi) {
      const double* dyb = n.grad.data() + bi * Co * Ho * Wo;
      im2col(dyb, Co, Ho, Wo, kh, kw, stride, pad, H, W, dcols.data());
      if (xn.requires_grad) {
        kern::gemm_nn(Ci, R, L, wn.value.data(), R, dcols.data(), L,
                      xn.grad.data() + bi * Ci * L, L, true);
      }
      if (wn.requires_grad) {
        kern::gemm_nt(Ci, L, R, xn.value.data() + bi * Ci * L, L, dcols.data(), L,
                      wn.grad.data(), R, true);
      }
      if (has_bias && n.inputs[2]->requires_grad) {
        for (int64_t c = 0; c < Co; ++c) {
          n.inputs[2]->grad[c] += kern::sum(Ho * Wo, dyb + c * Ho * Wo);
        }
      }
    }
  };
  return make_node(std::move(out), std::move(inputs), std::move(fn));
}

Var batch_norm2d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
                 Tensor& running_var, bool training, double momentum, double eps) {
  const Tensor& xv = x.value();
  HT_ASSERT(xv.ndim() == 4, "batch_norm2d expects (B,C,H,W)");
  const int64_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  HT_ASSERT(gamma.value().numel() == C && beta.value().numel() == C, "batch_norm2d affine shape");
  HT_ASSERT(running_mean.numel() == C && running_var.numel() == C,
            "batch_norm2d running stats shape");
  const int64_t plane = H * W;
  const int64_t N = B * plane;

  Tensor mu({C});
  Tensor invstd({C});
  if (training) {
    HT_CHECK(N > 1, "batch norm in training mode needs more than one value per channel");
    for (int64_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (int64_t bi = 0; bi < B; ++bi) {
        s += kern::sum(plane, xv.data() + (bi * C + c) * plane);
      }
      mu[c] = s / static_cast<double>(N);
    }
    for (int64_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (int64_t bi = 0; bi < B; ++bi) {
        const double* p = xv.data() + (bi * C + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu[c];
          s += d * d;
        }
      }
      const double var = s / static_cast<double>(N);
      invstd[c] = 1.0 / std::sqrt(var + eps);
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu[c];
      running_var[c] = (1.0 - momentum) * running_var[c] +
                       momentum * var * static_cast<double>(N) / static_cast<double>(N - 1);
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mu[c] = running_mean[c];
      invstd[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor out(xv.shape());
  for (int64_t bi = 0; bi < B; ++bi) {
    for (int64_t c = 0; c < C; ++c) {
      const double* src = xv.data() + (bi * C + c) * plane;
      double* dst = out.data() + (bi * C + c) * plane;
      kern::vshift(plane, src, -mu[c], dst);
      kern::scale(plane, gamma.value()[c] * invstd[c], dst);
      kern::vshift(plane, dst, beta.value()[c], dst);
    }
  }

  auto fn = [B, C, plane, N, training, mu, invstd](Node& n) {
    Node& xn = *n.inputs[0];
    Node& gn = *n.inputs[1];
    Node& bn = *n.inputs[2];
    for (int64_t c = 0; c < C; ++c) {
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (int64_t bi = 0; bi < B; ++bi) {
        const double* dy = n.grad.data() + (bi * C + c) * plane;
        const double* xp = xn.value.data() + (bi * C + c) * plane;
        sum_dy += kern::sum(plane, dy);
        double s = 0.0;
        for (int64_t i = 0; i < plane; ++i) s += dy[i] * (xp[i] - mu[c]) * invstd[c];
        sum_dy_xhat += s;
      }
      if (gn.requires_grad) gn.grad[c] += sum_dy_xhat;
      if (bn.requires_grad) bn.grad[c] += sum_dy;
      if (!xn.requires_grad) continue;
      const double coef = gn.value[c] * invstd[c];
      if (training) {
        const double mean_dy = sum_dy / static_cast<double>(N);
        const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(N);
        for (int64_t bi = 0; bi < B; ++bi) {
          const double* dy = n.grad.data() + (bi * C + c) * plane;
          const double* xp = xn.value.data() + (bi * C + c) * plane;
          double* dx = xn.grad.data() + (bi * C + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            const double xhat = (xp[i] - mu[c]) * invstd[c];
            dx[i] += coef * (dy[i] - mean_dy - xhat * mean_dy_xhat);
          }
        }
      } else {
        for (int64_t bi = 0; bi < B; ++bi) {
          kern::axpy(plane, coef, n.grad.data() + (bi * C + c) * plane,
                     xn.grad.data() + (bi * C + c) * plane);
        }
      }
    }
  };
  return make_node(std::move(out), {x.node(), gamma.node(), beta.node()}, std::move(fn));
}

Var tokens_from_chw(const Var& x) {
  const Tensor& xv = x.value();
  HT_ASSERT(xv.ndim() == 4, "tokens_from_chw expects (B,C,H,W)");
  const int64_t B = xv.dim(0), C = xv.dim(1), L = xv.dim(2) * xv.dim(3);
  Tensor out({B, L, C});
  for (int64_t b = 0; b < B; ++b) {
    const double* src = xv.data() + b * C * L;
    double* dst = out.data() + b * L * C;
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t l = 0; l < L; ++l) dst[l * C + c] = src[c * L + l];
    }
  }
  return make_node(std::move(out), {x.node()}, [B, C, L](Node& n) {
    Node& in = *n.inputs[0];
    if (!in.requires_grad) return;
    for (int64_t b = 0; b < B; ++b) {
      const double* src = n.grad.data() + b * L * C;
      double* dst = in.grad.data() + b * C * L;
      for (int64_t c = 0; c < C; ++c) {
        for (int64_t l = 0; l < L; ++l) dst[c * L + l] += src[l * C + c];
      }
    }
  });
}

Var chw_from_tokens(const Var& x, int64_t H, int64_t W) {
  const Tensor& xv = x.value();
  HT_ASSERT(xv.ndim() == 3, "chw_from_tokens expects (B,L,C)");
  const int64_t B = xv.dim(0), L = xv.dim(1), C = xv.dim(2);
  HT_ASSERT(L == H * W, "chw_from_tokens token count does not match H*W");
  Tensor out({B, C, H, W});
  for (int64_t b = 0; b < B; ++b) {
    const double* src = xv.data() + b * L * C;
    double* dst = out.data() + b * C * L;
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t l = 0; l < L; ++l) dst[c * L + l] = src[l * C + c];
    }
  }
  return make_node(std::move(out), {x.node()}, [B, C, L](Node& n) {
    Node& in = *n.inputs[0];
    if (!in.requires_grad) return;
    for (int64_t b = 0; b < B; ++b) {
      const double* src = n.grad.data() + b * C * L;
      double* dst = in.grad.data() + b * L * C;
      for (int64_t c = 0; c < C; ++c) {
        for (int64_t l = 0; l < L; ++l) dst[l * C + c] += src[c * L + l];
      }
    }
  });
}

namespace {

// Gathers one head's contiguous (L,dh) slab out of (B,L,C) tokens.
void pack_head(const double* x, int64_t b, int64_t L, int64_t C, int64_t h, int64_t dh,
               double* dst) {
  const double* src = x + b * L * C + h * dh;
  for (int64_t l = 0; l < L; ++l) {
    std::memcpy(dst + l * dh, src + l * C, sizeof(double) * static_cast<size_t>(dh));
  }
}

void scatter_head_add(const double* src, int64_t b, int64_t L, int64_t C, int64_t h, int64_t dh,
                      double* x) {
  double* dst = x + b * L * C + h * dh;
  for (int64_t l = 0; l < L; ++l) {
    for (int64_t d = 0; d < dh; ++d) dst[l * C + d] += src[l * dh + d];
  }
}

}  // namespace

Var attention(const Var& q, const Var& k, const Var& v, int heads, double scale) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  HT_ASSERT(qv.ndim() == 3 && kv.ndim() == 3 && vv.ndim() == 3, "attention expects (B,L,C)");
  const int64_t B = qv.dim(0), Lq = qv.dim(1), C = qv.dim(2);
  const int64_t Lk = kv.dim(1);
  HT_ASSERT(kv.dim(0) == B && vv.dim(0) == B, "attention batch mismatch");
  HT_ASSERT(kv.dim(2) == C && vv.dim(2) == C, "attention channel mismatch");
  HT_ASSERT(vv.dim(1) == Lk, "attention key/value length mismatch");
  HT_ASSERT(heads >= 1 && C % heads == 0, "attention heads must divide channels");
  const int64_t dh = C / heads;

  Tensor out({B, Lq, C});
  {
    Tensor Qh({Lq, dh}), Kh({Lk, dh}), Vh({Lk, dh}), P({Lq, Lk}), O({Lq, dh});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t h = 0; h < heads; ++h) {
        pack_head(qv.data(), b, Lq, C, h, dh, Qh.data());
        pack_head(kv.data(), b, Lk, C, h, dh, Kh.data());
        pack_head(vv.data(), b, Lk, C, h, dh, Vh.data());
        kern::gemm_nt(Lq, dh, Lk, Qh.data(), dh, Kh.data(), dh, P.data(), Lk);
        kern::scale(Lq * Lk, scale, P.data());
        kern::softmax_rows(Lq, Lk, P.data(), P.data());
        kern::gemm_nn(Lq, Lk, dh, P.data(), Lk, Vh.data(), dh, O.data(), dh);
        scatter_head_add(O.data(), b, Lq, C, h, dh, out.data());
      }
    }
  }

  // Backward recomputes the softmax per (batch, head) instead of saving all
  // attention matrices, which keeps peak memory to one L_q x L_k slab.
  auto fn = [B, Lq, Lk, C, heads, dh, scale](Node& n) {
    Node& qn = *n.inputs[0];
    Node& kn = *n.inputs[1];
    Node& vn = *n.inputs[2];
    Tensor Qh({Lq, dh}), Kh({Lk, dh}), Vh({Lk, dh});
    Tensor P({Lq, Lk}), dP({Lq, Lk}), dOh({Lq, dh}), dH({Lk, dh});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t h = 0; h < heads; ++h) {
        pack_head(qn.value.data(), b, Lq, C, h, dh, Qh.data());
        pack_head(kn.value.data(), b, Lk, C, h, dh, Kh.data());
        pack_head(vn.value.data(), b, Lk, C, h, dh, Vh.data());
        pack_head(n.grad.data(), b, Lq, C, h, dh, dOh.data());
        kern::gemm_nt(Lq, dh, Lk, Qh.data(), dh, Kh.data(), dh, P.data(), Lk);
        kern::scale(Lq * Lk, scale, P.data());
        kern::softmax_rows(Lq, Lk, P.data(), P.data());

        if (vn.requires_grad) {
          kern::gemm_tn(Lk, Lq, dh, P.data(), Lk, dOh.data(), dh, dH.data(), dh, false);
          scatter_head_add(dH.data(), b, Lk, C, h, dh, vn.grad.data());
        }
        kern::gemm_nt(Lq, dh, Lk, dOh.data(), dh, Vh.data(), dh, dP.data(), Lk);
        for (int64_t i = 0; i < Lq; ++i) {
          double* dPi = dP.data() + i * Lk;
          const double* Pi = P.data() + i * Lk;
          const double r = kern::dot(Lk, dPi, Pi);
          for (int64_t j = 0; j < Lk; ++j) dPi[j] = scale * Pi[j] * (dPi[j] - r);
        }
        if (qn.requires_grad) {
          kern::gemm_nn(Lq, Lk, dh, dP.data(), Lk, Kh.data(), dh, dOh.data(), dh, false);
          scatter_head_add(dOh.data(), b, Lq, C, h, dh, qn.grad.data());
        }
        if (kn.requires_grad) {
          kern::gemm_tn(Lk, Lq, dh, dP.data(), Lk, Qh.data(), dh, dH.data(), dh, false);
          scatter_head_add(dH.data(), b, Lk, C, h, dh, kn.grad.data());
        }
      }
    }
  };
  return make_node(std::move(out), {q.node(), k.node(), v.node()}, std::move(fn));
}

Var cosine_map(const Var& teacher, const Var& student, double delta) {
  HT_ASSERT(!teacher.requires_grad(), "cosine_map teacher side must be constant");
  const Tensor& tv = teacher.value();
  const Tensor& sv = student.value();
  HT_ASSERT(tv.ndim() == 4 && tv.same_shape(sv), "cosine_map shape mismatch");
  HT_ASSERT(delta > 0.0, "cosine_map delta must be positive");
  const int64_t B = tv.dim(0), C = tv.dim(1), H = tv.dim(2), W = tv.dim(3);
  const int64_t plane = H * W;

  Tensor out({B, H, W});
  for (int64_t b = 0; b < B; ++b) {
    const double* tb = tv.data() + b * C * plane;
    const double* sb = sv.data() + b * C * plane;
    double* ob = out.data() + b * plane;
    for (int64_t l = 0; l < plane; ++l) {
      double tt = 0.0, ss = 0.0, ts = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        const double t = tb[c * plane + l];
        const double s = sb[c * plane + l];
        tt += t * t;
        ss += s * s;
        ts += t * s;
      }
      ob[l] = ts / (std::sqrt(tt) * std::sqrt(ss) + delta);
    }
  }

  auto fn = [B, C, plane, delta](Node& n) {
    Node& tn = *n.inputs[0];
    Node& sn = *n.inputs[1];
    if (!sn.requires_grad) return;
    for (int64_t b = 0; b < B; ++b) {
      const double* tb = tn.value.data() + b * C * plane;
      const double* sb = sn.value.data() + b * C * plane;
      const double* dyb = n.grad.data() + b * plane;
      double* gb = sn.grad.data() + b * C * plane;
      for (int64_t l = 0; l < plane; ++l) {
        double tt = 0.0, ss = 0.0, ts = 0.0;
        for (int64_t c = 0; c < C; ++c) {
          const double t = tb[c * plane + l];
          const double s = sb[c * plane + l];
          tt += t * t;
          ss += s * s;
          ts += t * s;
        }
        const double tnorm = std::sqrt(tt);
        const double snorm = std::sqrt(ss);
        const double den = tnorm * snorm + delta;
        const double y = ts / den;
        const double dy = dyb[l];
        if (snorm > 0.0) {
          const double coef = y * tnorm / (snorm * den);
          for (int64_t c = 0; c < C; ++c) {
            gb[c * plane + l] += dy * (tb[c * plane + l] / den - coef * sb[c * plane + l]);
          }
        } else {
          // At an exactly zero student vector the norm has no derivative;
          // only the inner product term contributes.
          for (int64_t c = 0; c < C; ++c) {
            gb[c * plane + l] += dy * tb[c * plane + l] / den;
          }
        }
      }
    }
  };
  return make_node(std::move(out), {teacher.node(), student.node()}, std::move(fn));
}

Var mean_all(const Var& x) {
  const int64_t m = x.value().numel();
  HT_ASSERT(m > 0, "mean_all of empty tensor");
  Tensor out({1});
  out[0] = kern::sum(m, x.value().data()) / static_cast<double>(m);
  return make_node(std::move(out), {x.node()}, [m](Node& n) {
    Node& in = *n.inputs[0];
    if (in.requires_grad) {
      kern::vshift(m, in.grad.data(), n.grad[0] / static_cast<double>(m), in.grad.data());
    }
  });
}

}  // namespace hetnet::ad
