#include "hetnet/student.hpp"

#include <algorithm>

#include "hetnet/common.hpp"

namespace hetnet::student {

StudentNetwork::StudentNetwork(nn::ParamStore& ps, const std::string& prefix,
                               const std::vector<teacher::StageSpec>& local_stages,
                               const std::vector<int>& layers_used, int64_t in_channels,
                               RngStream& rng)
    : layers_used_(layers_used), in_channels_(in_channels) {
  HT_CHECK(!layers_used.empty(), "student: layers_used is empty");
  HT_CHECK(std::is_sorted(layers_used.begin(), layers_used.end()),
           "student: layers_used must be ascending");
  const int deepest = layers_used.back();
  const int shallowest = layers_used.front();
  HT_CHECK(deepest <= static_cast<int>(local_stages.size()),
           "student: layer " + std::to_string(deepest) + " exceeds the teacher's " +
               std::to_string(local_stages.size()) + " stages");

  const auto ch = [&](int layer) {
    return local_stages[static_cast<size_t>(layer - 1)].channels;
  };
  emb_channels_ = 2 * ch(deepest);

  oce_.c1 = nn::Conv2d(ps, prefix + ".oce.conv1", in_channels, emb_channels_, 3, 2, 1, false, rng);
  oce_.b1 = nn::BatchNorm2d(ps, prefix + ".oce.bn1", emb_channels_);
  oce_.c2 = nn::Conv2d(ps, prefix + ".oce.conv2", emb_channels_, emb_channels_, 3, 1, 1, false,
                       rng);
  oce_.b2 = nn::BatchNorm2d(ps, prefix + ".oce.bn2", emb_channels_);
  oce_.shortcut_c = nn::Conv2d(ps, prefix + ".oce.shortcut", in_channels, emb_channels_, 1, 2, 0,
                               false, rng);
  oce_.bs = nn::BatchNorm2d(ps, prefix + ".oce.shortcut_bn", emb_channels_);

  int64_t cin = emb_channels_;
  for (int t = deepest; t >= shallowest; --t) {
    const int64_t cout = ch(t);
    const std::string base = prefix + ".decode" + std::to_string(t);
    ResBlock blk;
    blk.transposed = true;
    blk.t1 = nn::ConvTranspose2d(ps, base + ".up", cin, cout, 4, 2, 1, false, rng);
    blk.b1 = nn::BatchNorm2d(ps, base + ".bn1", cout);
    blk.c2 = nn::Conv2d(ps, base + ".conv", cout, cout, 3, 1, 1, false, rng);
    blk.b2 = nn::BatchNorm2d(ps, base + ".bn2", cout);
    blk.shortcut_t = nn::ConvTranspose2d(ps, base + ".shortcut", cin, cout, 2, 2, 0, false, rng);
    blk.bs = nn::BatchNorm2d(ps, base + ".shortcut_bn", cout);
    stages_.push_back(std::move(blk));
    stage_layers_.push_back(t);
    cin = cout;
  }
}

ad::Var StudentNetwork::run_block(const ResBlock& blk, const ad::Var& x, bool training) const {
  ad::Var y = blk.transposed ? blk.t1(x) : blk.c1(x);
  y = ad::relu(blk.b1(y, training));
  y = blk.b2(blk.c2(y), training);
  ad::Var s = blk.transposed ? blk.shortcut_t(x) : blk.shortcut_c(x);
  s = blk.bs(s, training);
  return ad::relu(ad::add(y, s));
}

std::map<int, ad::Var> StudentNetwork::operator()(const ad::Var& fused, bool training) const {
  const Tensor& v = fused.value();
  HT_CHECK(v.ndim() == 4 && v.dim(1) == in_channels_,
           "student: fused input has shape " + shape_str(v.shape()) + ", expected (B," +
               std::to_string(in_channels_) + ",H,W)");
  HT_CHECK(v.dim(2) % 2 == 0 && v.dim(3) % 2 == 0,
           "student: fused spatial dims must be even for the bottleneck");

  ad::Var x = run_block(oce_, fused, training);
  std::map<int, ad::Var> out;
  for (size_t i = 0; i < stages_.size(); ++i) {
    x = run_block(stages_[i], x, training);
    const int layer = stage_layers_[i];
    if (std::find(layers_used_.begin(), layers_used_.end(), layer) != layers_used_.end())
      out.emplace(layer, x);
  }
  return out;
}

}  // namespace hetnet::student
