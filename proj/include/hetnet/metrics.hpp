#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hetnet/dataset.hpp"
#include "hetnet/model.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::metrics {

// Mann-Whitney AUROC with average ranks for ties: P(pos > neg) + P(tie)/2.
// Labels are 0/1; both classes must be present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// AUROC over the concatenated pixels of all maps against 0/1 masks.
double pixel_auroc(const std::vector<Tensor>& maps,
                   const std::vector<Tensor>& masks);

struct ProOptions {
  double fpr_limit = 0.3;
  int n_thresholds = 200;
  int connectivity = 8;  // or 4
};

// Per-region overlap: thresholds sweep the score range with n_thresholds
// uniform steps plus the exact endpoints; each threshold yields the mean,
// over every connected mask component, of the covered fraction of that
// component, against the false-positive rate over all normal pixels. The
// curve is anchored at (0,0) by the empty prediction and reaches FPR 1 at
// the score minimum; the area over [0, fpr_limit] is taken by trapezoid
// with linear interpolation at the clip boundary and normalized by the
// limit.
double pro(const std::vector<Tensor>& maps, const std::vector<Tensor>& masks,
           const ProOptions& opt = {});

struct EvalReport {
  std::string category;
  double image_auroc = 0.0;
  double pixel_auroc = 0.0;
  double pro = 0.0;
  int64_t n_images = 0;
  int64_t n_defect = 0;
  int64_t n_pixels = 0;
  double pro_fpr_limit = 0.3;
  int pro_n_thresholds = 200;
  int pro_connectivity = 8;
  double smoothing_sigma = 0.0;
  std::string config_fingerprint;
};

// Scores every test image with the model's config (batched), pairs the
// final maps with ground-truth masks (all-zero for good images), computes
// the three metrics, and writes report.json and report.csv under out_dir.
EvalReport evaluate(const model::HetNet& m, const data::DatasetIndex& test,
                    const std::string& out_dir);

}  // namespace hetnet::metrics
