#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetnet/config.hpp"
#include "hetnet/fusion.hpp"
#include "hetnet/lmgn.hpp"
#include "hetnet/nn.hpp"
#include "hetnet/student.hpp"
#include "hetnet/teacher.hpp"

namespace hetnet::model {

// Frozen teacher outputs for one batch. global_aligned is resampled to the
// local branch's per-layer spatial size and stays empty whenever the model
// runs without its global branch.
struct TeacherFeatures {
  teacher::Pyramid local;
  teacher::Pyramid global_aligned;
};

// The full detector: frozen encoder(s) feeding a trainable fusion stack and
// student decoder. The global encoder exists only for the heterogeneous
// structure with cross-attention fusion enabled; every other mode reduces to
// a single-teacher pipeline with per-layer channel alignment.
class HetNet {
 public:
  static HetNet build(const ExperimentConfig& cfg);

  TeacherFeatures extract(const Tensor& batch) const;

  // Fuses per-layer features into one map at the deepest spatial size.
  // Pyramids must carry exactly the configured layers; traces, when given,
  // receive per-layer attention intermediates.
  ad::Var fuse(const teacher::Pyramid& local, const teacher::Pyramid& global_aligned,
               bool training, std::map<int, fusion::AlgfTrace>* traces = nullptr) const;
  ad::Var fuse(const TeacherFeatures& tf, bool training) const {
    return fuse(tf.local, tf.global_aligned, training);
  }

  std::map<int, ad::Var> student_forward(const ad::Var& fused, bool training) const;

  bool uses_global() const { return uses_global_; }
  const teacher::Encoder& local_encoder() const { return local_; }
  const teacher::Encoder& global_encoder() const;

  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  const ExperimentConfig& config() const { return cfg_; }
  const std::vector<int>& layers() const { return cfg_.layers_used; }
  int64_t fused_channels() const { return fused_channels_; }
  const student::StudentNetwork& student() const { return student_; }

  // Local-branch feature geometry at the configured image size, keyed by
  // layer; this is what noise plans and stats fitting are shaped against.
  std::map<int, lmgn::LayerDims> feature_dims() const;

 private:
  HetNet() = default;

  ExperimentConfig cfg_;
  teacher::Encoder local_, global_;
  bool uses_global_ = false;
  int64_t fused_channels_ = 0;
  nn::ParamStore ps_;
  std::map<int, fusion::ALGFBlock> algf_;
  std::map<int, nn::Conv2d> align_only_;
  fusion::MHFModule mhf_;
  student::StudentNetwork student_;
};

}  // namespace hetnet::model
