#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hetnet/config.hpp"
#include "hetnet/dataset.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/teacher.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::lmgn {

struct LayerDims {
  int64_t c = 0, h = 0, w = 0;
  bool operator==(const LayerDims&) const = default;
};

// One axis-aligned square patch per layer, always fully inside the map.
struct LayerPatch {
  int layer = 0;
  int64_t top = 0, left = 0, side = 0;
  LayerDims dims;
};

struct NoisePatchPlan {
  std::vector<LayerPatch> patches;
  // Key for the RNG stream that draws this plan's noise values.
  uint64_t substream = 0;
  const LayerPatch& layer(int k) const;
};

// Draws side uniform in [ceil(frac_lo*H), floor(frac_hi*H)] and the patch
// corner uniform over in-bounds placements, independently per layer.
NoisePatchPlan make_plan(const std::map<int, LayerDims>& dims, double frac_lo, double frac_hi,
                         RngStream& rng);

struct LayerStats {
  int layer = 0;
  LayerDims dims;
  Tensor mean;  // (C,H,W)
  // Raw sample covariance; the regularizer is added once, when factoring.
  Tensor cov;   // (H,W,C,C) in full mode, otherwise empty
  Tensor var;   // (C,H,W) in diagonal mode, otherwise empty
  // Cholesky factors of cov + eps*I, (H,W,C,C) lower-triangular in full
  // mode; sqrt(var + eps) as (C,H,W) in diagonal mode.
  Tensor chol;
};

struct GaussianFieldStats {
  std::string backbone;
  std::vector<int> layers;
  CovarianceMode mode = CovarianceMode::kFull;
  double epsilon = 0.01;
  int64_t sample_count = 0;
  std::vector<LayerStats> per_layer;

  const LayerStats& layer(int k) const;
  std::map<int, LayerDims> dims() const;
};

// Streams the training set through the local-branch teacher once,
// accumulating per-position first and second moments.
GaussianFieldStats fit_stats(const teacher::Encoder& local, const data::DatasetIndex& train,
                             const ExperimentConfig& cfg);

void save_stats(const std::string& path, const GaussianFieldStats& stats);
GaussianFieldStats load_stats(const std::string& path);

// Per-sample noise fields, (C,H,W) per layer, exactly zero outside the
// planned patch. patch_mean holds the stored mean masked to the patch so
// injection can subtract it in centered mode.
struct NoisePyramid {
  std::map<int, Tensor> xi;
  std::map<int, Tensor> patch_mean;
};

// Inside the patch each position independently draws xi = mu + scale*L*z.
NoisePyramid sample_noise(const GaussianFieldStats& stats, const NoisePatchPlan& plan,
                          RngStream& rng, double scale = 1.0);

// i.i.d. N(0, scale^2) inside the patch; mean field is zero.
NoisePyramid standard_normal_noise(const NoisePatchPlan& plan, RngStream& rng, double scale);

// add_xi: f + xi. add_centered: f + xi - patch_mean. Layer keys and shapes
// must match; tensors are per-sample (C,H,W).
std::map<int, Tensor> inject(const std::map<int, Tensor>& f, const NoisePyramid& noise,
                             NoiseMode mode);

}  // namespace hetnet::lmgn
