#include "hetnet/fusion.hpp"

#include <cmath>

#include "hetnet/common.hpp"
#include "hetnet/kernels.hpp"

namespace hetnet::fusion {

ALGFBlock::ALGFBlock(nn::ParamStore& ps, const std::string& name, int64_t c_local,
                     int64_t c_global, int heads, RngStream& rng)
    : heads_(heads), c_k_(c_local) {
  HT_CHECK(heads >= 1 && c_k_ % heads == 0,
           "fusion: attention heads (" + std::to_string(heads) + ") must divide C_k (" +
               std::to_string(c_k_) + ")");
  align_local_ = nn::Conv2d(ps, name + ".align_local", c_local, c_k_, 1, 1, 0, true, rng);
  align_global_ = nn::Conv2d(ps, name + ".align_global", c_global, c_k_, 1, 1, 0, true, rng);
  q_ = nn::Conv2d(ps, name + ".q", c_k_, c_k_, 1, 1, 0, true, rng);
  // A key bias shifts every logit of a query row equally, so the softmax
  // ignores it and it could never receive gradient; omit it.
  k_ = nn::Conv2d(ps, name + ".k", c_k_, c_k_, 1, 1, 0, false, rng);
  v_ = nn::Conv2d(ps, name + ".v", c_k_, c_k_, 1, 1, 0, true, rng);
  expand_ = nn::Conv2d(ps, name + ".expand", c_k_, 2 * c_k_, 1, 1, 0, true, rng);
  fuse_ = nn::Conv2d(ps, name + ".fuse", 2 * c_k_, c_k_, 1, 1, 0, true, rng);
}

ad::Var ALGFBlock::operator()(const ad::Var& f_local, const ad::Var& f_global,
                              AlgfTrace* trace) const {
  const Tensor& lv = f_local.value();
  const Tensor& gv = f_global.value();
  HT_CHECK(lv.ndim() == 4 && gv.ndim() == 4 && lv.dim(2) == gv.dim(2) && lv.dim(3) == gv.dim(3),
           "fusion: local " + shape_str(lv.shape()) + " and global " + shape_str(gv.shape()) +
               " are not spatially aligned");
  const int64_t H = lv.dim(2), W = lv.dim(3);

  auto al = align_local_(f_local);
  auto ag = align_global_(f_global);
  auto g = ad::concat_channels({al, ag});

  auto qt = ad::tokens_from_chw(q_(al));
  auto kt = ad::tokens_from_chw(k_(ag));
  auto vt = ad::tokens_from_chw(v_(al));
  const double scale = 1.0 / std::sqrt(static_cast<double>(c_k_ / heads_));
  auto at = ad::attention(qt, kt, vt, heads_, scale);

  if (trace) {
    trace->q = qt.value();
    trace->k = kt.value();
    trace->v = vt.value();
    trace->attn_out = at.value();
    trace->probs.clear();
    const int64_t B = trace->q.dim(0), L = trace->q.dim(1), dh = c_k_ / heads_;
    Tensor qh({L, dh}), kh({L, dh});
    for (int64_t b = 0; b < B; ++b)
      for (int h = 0; h < heads_; ++h) {
        for (int64_t l = 0; l < L; ++l)
          for (int64_t d = 0; d < dh; ++d) {
            qh.at(l, d) = trace->q.at(b, l, h * dh + d);
            kh.at(l, d) = trace->k.at(b, l, h * dh + d);
          }
        Tensor p({L, L});
        kern::gemm_nt(L, dh, L, qh.data(), dh, kh.data(), dh, p.data(), L);
        kern::scale(L * L, scale, p.data());
        kern::softmax_rows(L, L, p.data(), p.data());
        trace->probs.push_back(std::move(p));
      }
  }

  auto h = expand_(ad::chw_from_tokens(at, H, W));
  return fuse_(ad::add(h, g));
}

ad::Var ALGFBlock::bypass(const ad::Var& f_local) const { return align_local_(f_local); }

MHFModule::MHFModule(nn::ParamStore& ps, const std::string& name,
                     const std::vector<LayerSpec>& layers, RngStream& rng)
    : specs_(layers) {
  HT_CHECK(!layers.empty(), "fusion: MHF needs at least one layer");
  for (size_t i = 0; i + 1 < layers.size(); ++i)
    HT_CHECK(layers[i].layer < layers[i + 1].layer, "fusion: MHF layers must be ascending");
  HT_CHECK(layers.back().factor == 1, "fusion: deepest MHF layer must have factor 1");
  for (const auto& spec : layers) {
    HT_CHECK(spec.factor >= 1 && (spec.factor & (spec.factor - 1)) == 0,
             "fusion: layer " + std::to_string(spec.layer) + " spatial factor " +
                 std::to_string(spec.factor) + " is not a power of two");
    std::vector<Stage> chain;
    const std::string base = name + ".layer" + std::to_string(spec.layer);
    for (int64_t f = spec.factor, s = 0; f > 1; f /= 2, ++s) {
      Stage st;
      st.conv = nn::Conv2d(ps, base + ".down" + std::to_string(s), spec.channels, spec.channels,
                           3, 2, 1, false, rng);
      st.bn = nn::BatchNorm2d(ps, base + ".bn" + std::to_string(s), spec.channels);
      chain.push_back(std::move(st));
    }
    chains_.push_back(std::move(chain));
    out_channels_ += spec.channels;
  }
}

ad::Var MHFModule::operator()(const std::map<int, ad::Var>& o, bool training) const {
  HT_CHECK(o.size() == specs_.size(), "fusion: MHF expects " + std::to_string(specs_.size()) +
                                          " layers, got " + std::to_string(o.size()));
  const auto& deep = o.at(specs_.back().layer).value();
  const int64_t hn = deep.dim(2), wn = deep.dim(3);
  std::vector<ad::Var> parts;
  for (size_t i = 0; i < specs_.size(); ++i) {
    const auto& spec = specs_[i];
    auto it = o.find(spec.layer);
    HT_CHECK(it != o.end(), "fusion: MHF input is missing layer " + std::to_string(spec.layer));
    const Tensor& v = it->second.value();
    HT_CHECK(v.dim(1) == spec.channels && v.dim(2) == hn * spec.factor &&
                 v.dim(3) == wn * spec.factor,
             "fusion: MHF layer " + std::to_string(spec.layer) + " has shape " +
                 shape_str(v.shape()) + ", expected (" + std::to_string(spec.channels) + "," +
                 std::to_string(hn * spec.factor) + "," + std::to_string(wn * spec.factor) + ")");
    ad::Var x = it->second;
    for (const auto& st : chains_[i]) x = ad::relu(st.bn(st.conv(x), training));
    parts.push_back(x);
  }
  return parts.size() == 1 ? parts[0] : ad::concat_channels(parts);
}

}  // namespace hetnet::fusion
