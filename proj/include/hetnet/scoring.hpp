#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hetnet/model.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::scoring {

struct AnomalyMap {
  Tensor map;  // (S,S) at input resolution, finite, entries >= -1e-6
  double image_score = 0.0;
  std::map<int, Tensor> layer_maps;  // raw (H_k,W_k) maps, kept on request
};

// Upsamples each (B,Hk,Wk) map bilinearly to (B,side,side), sums them
// elementwise, and Gaussian-smooths the sum when sigma > 0.
Tensor aggregate(const std::vector<Tensor>& layer_maps, int64_t side,
                 double sigma);

// Clean-path inference: no noise is injected and no noise statistics are
// consulted. Per layer, the cosine-distance map between the local teacher
// feature and the student reconstruction (eval mode) is fed through
// aggregate() at the input resolution with the configured smoothing_sigma;
// image_score is the max of the resulting map.
std::vector<AnomalyMap> score(const model::HetNet& m, const Tensor& images,
                              bool keep_layer_maps = false);

// Writes "image,score" rows after a header line, scores at full precision.
void write_scores_csv(const std::string& path,
                      const std::vector<std::pair<std::string, double>>& rows);

// Renders the map over the raw [0,1] image; both must share spatial dims.
void export_heatmap(const AnomalyMap& am, const Tensor& image_chw,
                    const std::string& path);

}  // namespace hetnet::scoring
