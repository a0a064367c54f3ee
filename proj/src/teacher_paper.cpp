#include <cmath>
#include <limits>
#include <vector>

#include "hetnet/autodiff.hpp"
#include "teacher_impl.hpp"

namespace hetnet::teacher {

namespace {

Tensor maxpool2d_3x3_s2_p1(const Tensor& x) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Ho = (H + 2 - 3) / 2 + 1, Wo = (W + 2 - 3) / 2 + 1;
  Tensor out({B, C, Ho, Wo});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      const double* in = x.data() + (b * C + c) * H * W;
      double* o = out.data() + (b * C + c) * Ho * Wo;
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          double m = -std::numeric_limits<double>::infinity();
          for (int64_t ky = 0; ky < 3; ++ky)
            for (int64_t kx = 0; kx < 3; ++kx) {
              const int64_t y = oy * 2 - 1 + ky, xx = ox * 2 - 1 + kx;
              if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
              m = std::max(m, in[y * W + xx]);
            }
          o[oy * Wo + ox] = m;
        }
    }
  return out;
}

// Per-position normalization over the channel dim of (B,C,H,W).
Tensor ln_channels(const Tensor& x, const Tensor& g, const Tensor& b) {
  const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  Tensor out(x.shape());
  for (int64_t n = 0; n < B; ++n)
    for (int64_t p = 0; p < HW; ++p) {
      const double* in = x.data() + n * C * HW;
      double mu = 0.0;
      for (int64_t c = 0; c < C; ++c) mu += in[c * HW + p];
      mu /= static_cast<double>(C);
      double var = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        const double d = in[c * HW + p] - mu;
        var += d * d;
      }
      var /= static_cast<double>(C);
      const double inv = 1.0 / std::sqrt(var + 1e-5);
      double* o = out.data() + n * C * HW;
      for (int64_t c = 0; c < C; ++c)
        o[c * HW + p] = (in[c * HW + p] - mu) * inv * g.data()[c] + b.data()[c];
    }
  return out;
}

// (B,C,H,W) -> (B*nWindows, win*win, C), windows row-major.
Tensor window_partition(const Tensor& x, int64_t win) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  HT_CHECK(H % win == 0 && W % win == 0,
           "teacher: window size " + std::to_string(win) + " does not divide feature size " +
               std::to_string(H) + "x" + std::to_string(W));
  const int64_t wy = H / win, wx = W / win;
  Tensor out({B * wy * wx, win * win, C});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t gy = 0; gy < wy; ++gy)
      for (int64_t gx = 0; gx < wx; ++gx) {
        const int64_t wi = (b * wy + gy) * wx + gx;
        for (int64_t iy = 0; iy < win; ++iy)
          for (int64_t ix = 0; ix < win; ++ix) {
            const int64_t tok = iy * win + ix;
            const int64_t y = gy * win + iy, xx = gx * win + ix;
            for (int64_t c = 0; c < C; ++c)
              out.at(wi, tok, c) = x.at(b, c, y, xx);
          }
      }
  return out;
}

Tensor window_reverse(const Tensor& t, int64_t B, int64_t C, int64_t H, int64_t W, int64_t win) {
  const int64_t wy = H / win, wx = W / win;
  Tensor out({B, C, H, W});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t gy = 0; gy < wy; ++gy)
      for (int64_t gx = 0; gx < wx; ++gx) {
        const int64_t wi = (b * wy + gy) * wx + gx;
        for (int64_t iy = 0; iy < win; ++iy)
          for (int64_t ix = 0; ix < win; ++ix) {
            const int64_t tok = iy * win + ix;
            for (int64_t c = 0; c < C; ++c)
              out.at(b, c, gy * win + iy, gx * win + ix) = t.at(wi, tok, c);
          }
      }
  return out;
}

// (B,C,H,W) -> (B,4C,H/2,W/2); 2x2 neighborhoods stacked as four channel
// groups in (even,even),(even,odd),(odd,even),(odd,odd) order.
Tensor space_to_depth2(const Tensor& x) {
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  HT_CHECK(H % 2 == 0 && W % 2 == 0, "teacher: patch merge needs even feature dims");
  Tensor out({B, 4 * C, H / 2, W / 2});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t g = 0; g < 4; ++g) {
      const int64_t oy = g >> 1, ox = g & 1;
      for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H / 2; ++y)
          for (int64_t xx = 0; xx < W / 2; ++xx)
            out.at(b, g * C + c, y, xx) = x.at(b, c, 2 * y + oy, 2 * xx + ox);
    }
  return out;
}

struct Bottleneck {
  FConv c1, c2, c3, down;
  FBatchNorm b1, b2, b3, bdown;
  bool has_down = false;

  Bottleneck() = default;
  Bottleneck(TensorStore& ts, const std::string& base, int64_t cin, int64_t width, int64_t cout,
             int stride, RngStream& rng)
      : c1(ts, base + ".conv1", cin, width, 1, 1, 0, rng),
        c2(ts, base + ".conv2", width, width, 3, stride, 1, rng),
        c3(ts, base + ".conv3", width, cout, 1, 1, 0, rng),
        b1(ts, base + ".bn1", width),
        b2(ts, base + ".bn2", width),
        b3(ts, base + ".bn3", cout),
        has_down(stride != 1 || cin != cout) {
    if (has_down) {
      down = FConv(ts, base + ".downsample", cin, cout, 1, stride, 0, rng);
      bdown = FBatchNorm(ts, base + ".downsample_bn", cout);
    }
  }

  ad::Var operator()(const ad::Var& x) const {
    auto y = ad::relu(b1(c1(x)));
    y = ad::relu(b2(c2(y)));
    y = b3(c3(y));
    auto s = has_down ? bdown(down(x)) : x;
    return ad::relu(ad::add(y, s));
  }
};

// Wide-ResNet-50 first three stages: channels 256/512/1024 at strides
// 4/8/16, bottleneck widths doubled relative to the standard ResNet-50.
class WideResnet : public EncoderImpl {
 public:
  explicit WideResnet(RngStream& rng)
      : stem_(store, "stem.conv", 3, 64, 7, 2, 3, rng), stem_bn_(store, "stem.bn", 64) {
    kind = Encoder::Kind::kCnnLocal;
    specs = {{256, 4}, {512, 8}, {1024, 16}};
    const int counts[3] = {3, 4, 6};
    int64_t cin = 64;
    for (int s = 0; s < 3; ++s) {
      const int64_t planes = 64 << s;
      const int64_t width = planes * 2;
      const int64_t cout = planes * 4;
      for (int blk = 0; blk < counts[s]; ++blk) {
        const std::string base =
            "layer" + std::to_string(s + 1) + ".block" + std::to_string(blk);
        const int stride = (blk == 0 && s > 0) ? 2 : 1;
        blocks_[s].emplace_back(store, base, blk == 0 ? cin : cout, width, cout, stride, rng);
      }
      cin = cout;
    }
  }

  std::vector<Tensor> forward(const Tensor& batch) const override {
    ad::Var x = ad::Var::constant(batch);
    x = ad::relu(stem_bn_(stem_(x)));
    x = ad::Var::constant(maxpool2d_3x3_s2_p1(x.value()));
    std::vector<Tensor> out;
    for (int s = 0; s < 3; ++s) {
      for (const auto& blk : blocks_[s]) x = blk(x);
      out.push_back(x.value());
    }
    return out;
  }

 private:
  FConv stem_;
  FBatchNorm stem_bn_;
  std::vector<Bottleneck> blocks_[3];
};

struct LayerNormParams {
  const Tensor* g = nullptr;
  const Tensor* b = nullptr;
  LayerNormParams() = default;
  LayerNormParams(TensorStore& ts, const std::string& name, int64_t c) {
    g = &ts.add(name + ".weight", Tensor::full({c}, 1.0));
    b = &ts.add(name + ".bias", Tensor({c}));
  }
  Tensor operator()(const Tensor& x) const { return ln_channels(x, *g, *b); }
};

struct SwinBlock {
  LayerNormParams ln1, ln2;
  FConv q, k, v, proj, fc1, fc2;
  int heads = 1;
  int64_t channels = 0, window = 8;

  SwinBlock() = default;
  SwinBlock(TensorStore& ts, const std::string& base, int64_t c, int heads_, int64_t window_,
            RngStream& rng)
      : ln1(ts, base + ".ln1", c),
        ln2(ts, base + ".ln2", c),
        q(ts, base + ".q", c, c, 1, 1, 0, rng),
        k(ts, base + ".k", c, c, 1, 1, 0, rng),
        v(ts, base + ".v", c, c, 1, 1, 0, rng),
        proj(ts, base + ".proj", c, c, 1, 1, 0, rng),
        fc1(ts, base + ".fc1", c, 4 * c, 1, 1, 0, rng),
        fc2(ts, base + ".fc2", 4 * c, c, 1, 1, 0, rng),
        heads(heads_),
        channels(c),
        window(window_) {}

  ad::Var operator()(const ad::Var& x) const {
    const int64_t B = x.value().dim(0), H = x.value().dim(2), W = x.value().dim(3);
    auto t = ad::Var::constant(ln1(x.value()));
    const Tensor qw = window_partition(q(t).value(), window);
    const Tensor kw = window_partition(k(t).value(), window);
    const Tensor vw = window_partition(v(t).value(), window);
    const double scale = 1.0 / std::sqrt(static_cast<double>(channels / heads));
    const Tensor aw = ad::attention(ad::Var::constant(qw), ad::Var::constant(kw),
                                    ad::Var::constant(vw), heads, scale)
                          .value();
    auto a = ad::Var::constant(window_reverse(aw, B, channels, H, W, window));
    auto y = ad::add(x, proj(a));
    auto m = ad::Var::constant(ln2(y.value()));
    return ad::add(y, fc2(ad::relu(fc1(m))));
  }
};

// Swin-T stage geometry: windowed attention at channels 96/192/384,
// strides 4/8/16, two blocks per stage, patch merging between stages.
class SwinT : public EncoderImpl {
 public:
  explicit SwinT(RngStream& rng) : embed_(store, "embed", 3, 96, 4, 4, 0, rng) {
    kind = Encoder::Kind::kAttnGlobal;
    specs = {{96, 4}, {192, 8}, {384, 16}};
    embed_ln_ = LayerNormParams(store, "embed_ln", 96);
    const int heads[3] = {3, 6, 12};
    for (int s = 0; s < 3; ++s) {
      const int64_t c = specs[static_cast<size_t>(s)].channels;
      for (int blk = 0; blk < 2; ++blk)
        blocks_[s].emplace_back(store,
                                "stage" + std::to_string(s + 1) + ".block" + std::to_string(blk),
                                c, heads[s], 8, rng);
      if (s < 2) {
        merge_ln_[s] = LayerNormParams(store, "merge" + std::to_string(s + 1) + ".ln", 4 * c);
        merge_[s] = FConv(store, "merge" + std::to_string(s + 1) + ".reduce", 4 * c, 2 * c, 1, 1,
                          0, rng);
      }
    }
  }

  std::vector<Tensor> forward(const Tensor& batch) const override {
    ad::Var x = ad::Var::constant(batch);
    x = embed_(x);
    x = ad::Var::constant(embed_ln_(x.value()));
    std::vector<Tensor> out;
    for (int s = 0; s < 3; ++s) {
      if (s > 0) {
        Tensor merged = space_to_depth2(x.value());
        x = merge_[s - 1](ad::Var::constant(merge_ln_[s - 1](merged)));
      }
      for (const auto& blk : blocks_[s]) x = blk(x);
      out.push_back(x.value());
    }
    return out;
  }

 private:
  FConv embed_;
  LayerNormParams embed_ln_;
  std::vector<SwinBlock> blocks_[3];
  LayerNormParams merge_ln_[2];
  FConv merge_[2];
};

}  // namespace

std::shared_ptr<EncoderImpl> make_wide_resnet50(RngStream& rng) {
  return std::make_shared<WideResnet>(rng);
}
std::shared_ptr<EncoderImpl> make_swin_t(RngStream& rng) {
  return std::make_shared<SwinT>(rng);
}

}  // namespace hetnet::teacher
