#include "hetnet/model.hpp"

#include <algorithm>

#include "hetnet/common.hpp"

namespace hetnet::model {

HetNet HetNet::build(const ExperimentConfig& cfg) {
  validate_config(cfg);

  HetNet m;
  m.cfg_ = cfg;
  m.uses_global_ = cfg.teacher_structure == TeacherStructure::kHte && cfg.algf_enabled;

  const bool trans_local = cfg.teacher_structure == TeacherStructure::kTransOnly;
  const std::string& local_backbone = trans_local ? cfg.teacher_global : cfg.teacher_local;
  const std::string& local_weights =
      trans_local ? cfg.teacher_global_weights : cfg.teacher_local_weights;
  m.local_ = teacher::Encoder::load(local_backbone, local_weights, cfg.seed);
  if (m.uses_global_)
    m.global_ = teacher::Encoder::load(cfg.teacher_global, cfg.teacher_global_weights, cfg.seed);

  const auto& stages = m.local_.stages();
  const int deepest = cfg.layers_used.back();
  HT_CHECK(deepest <= static_cast<int>(stages.size()),
           "model: layer " + std::to_string(deepest) + " exceeds the " + local_backbone +
               " teacher's " + std::to_string(stages.size()) + " stages");
  HT_CHECK(cfg.image_size % stages[static_cast<size_t>(deepest - 1)].stride == 0,
           "model: image_size " + std::to_string(cfg.image_size) +
               " is not divisible by the deepest stage stride");

  RngStream rng(derive_key(static_cast<uint64_t>(cfg.seed), {"model", "init"}));
  const int64_t deep_stride = stages[static_cast<size_t>(deepest - 1)].stride;
  std::vector<fusion::MHFModule::LayerSpec> mhf_layers;
  for (int k : cfg.layers_used) {
    const auto& st = stages[static_cast<size_t>(k - 1)];
    const std::string name = "fusion.layer" + std::to_string(k);
    if (m.uses_global_) {
      const int64_t c_global = m.global_.stages()[static_cast<size_t>(k - 1)].channels;
      m.algf_.emplace(k, fusion::ALGFBlock(m.ps_, name, st.channels, c_global,
                                           cfg.attention_heads, rng));
    } else {
      m.align_only_.emplace(k, nn::Conv2d(m.ps_, name + ".align_local", st.channels, st.channels,
                                          1, 1, 0, true, rng));
    }
    mhf_layers.push_back({k, st.channels, deep_stride / st.stride});
  }
  m.mhf_ = fusion::MHFModule(m.ps_, "fusion.mhf", mhf_layers, rng);
  m.fused_channels_ = m.mhf_.out_channels();
  m.student_ = student::StudentNetwork(m.ps_, "student", stages, cfg.layers_used,
                                       m.fused_channels_, rng);
  return m;
}

const teacher::Encoder& HetNet::global_encoder() const {
  HT_CHECK(uses_global_, "model: this configuration has no global encoder");
  return global_;
}

TeacherFeatures HetNet::extract(const Tensor& batch) const {
  TeacherFeatures tf;
  tf.local = local_.extract(batch, cfg_.layers_used);
  if (uses_global_) {
    teacher::Pyramid g = global_.extract(batch, cfg_.layers_used);
    for (auto& [k, f] : g) {
      const Tensor& ref = tf.local.at(k);
      tf.global_aligned.emplace(k, teacher::align_global(f, ref.dim(2), ref.dim(3)));
    }
  }
  return tf;
}

ad::Var HetNet::fuse(const teacher::Pyramid& local, const teacher::Pyramid& global_aligned,
                     bool training, std::map<int, fusion::AlgfTrace>* traces) const {
  HT_CHECK(local.size() == cfg_.layers_used.size(),
           "model: fuse expects " + std::to_string(cfg_.layers_used.size()) +
               " local layers, got " + std::to_string(local.size()));
  if (!uses_global_)
    HT_CHECK(global_aligned.empty(),
             "model: global features supplied but this configuration has no global branch");

  std::map<int, ad::Var> per_layer;
  for (int k : cfg_.layers_used) {
    auto it = local.find(k);
    HT_CHECK(it != local.end(), "model: fuse is missing local layer " + std::to_string(k));
    ad::Var fl = ad::Var::constant(it->second);
    if (uses_global_) {
      auto gt = global_aligned.find(k);
      HT_CHECK(gt != global_aligned.end(),
               "model: fuse is missing global layer " + std::to_string(k));
      fusion::AlgfTrace* trace = traces ? &(*traces)[k] : nullptr;
      per_layer.emplace(k, algf_.at(k)(fl, ad::Var::constant(gt->second), trace));
    } else {
      per_layer.emplace(k, align_only_.at(k)(fl));
    }
  }
  return mhf_(per_layer, training);
}

std::map<int, ad::Var> HetNet::student_forward(const ad::Var& fused, bool training) const {
  return student_(fused, training);
}

std::map<int, lmgn::LayerDims> HetNet::feature_dims() const {
  std::map<int, lmgn::LayerDims> dims;
  const auto& stages = local_.stages();
  for (int k : cfg_.layers_used) {
    const auto& st = stages[static_cast<size_t>(k - 1)];
    const int64_t side = cfg_.image_size / st.stride;
    dims.emplace(k, lmgn::LayerDims{st.channels, side, side});
  }
  return dims;
}

}  // namespace hetnet::model
