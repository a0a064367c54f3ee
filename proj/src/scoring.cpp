#include "hetnet/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "hetnet/image.hpp"
#include "hetnet/training.hpp"

namespace hetnet::scoring {

Tensor aggregate(const std::vector<Tensor>& layer_maps, int64_t side,
                 double sigma) {
  HT_CHECK(!layer_maps.empty(), "scoring: aggregate needs at least one map");
  HT_CHECK(side > 0, "scoring: output side must be positive");
  const int64_t B = layer_maps.front().dim(0);
  Tensor total({B, side, side});
  for (const Tensor& lm : layer_maps) {
    HT_CHECK(lm.ndim() == 3, "scoring: layer maps must be shaped (B,H,W)");
    HT_CHECK(lm.dim(0) == B, "scoring: layer maps disagree on batch size");
    Tensor up = img::resize_bilinear(lm, side, side);
    double* t = total.data();
    const double* u = up.data();
    for (int64_t i = 0; i < total.numel(); ++i) t[i] += u[i];
  }
  if (sigma > 0.0) total = img::gaussian_blur(total, sigma);
  return total;
}

std::vector<AnomalyMap> score(const model::HetNet& m, const Tensor& images,
                              bool keep_layer_maps) {
  HT_CHECK(images.ndim() == 4 && images.dim(1) == 3,
           "scoring: expected an image batch shaped (B,3,S,S)");
  const int64_t S = m.config().image_size;
  HT_CHECK(images.dim(2) == S && images.dim(3) == S,
           "scoring: image batch is " + std::to_string(images.dim(2)) + "x" +
               std::to_string(images.dim(3)) + " but the model expects " +
               std::to_string(S) + "x" + std::to_string(S));
  const int64_t B = images.dim(0);

  model::TeacherFeatures tf = m.extract(images);
  ad::Var fused = m.fuse(tf, false);
  std::map<int, ad::Var> stud = m.student_forward(fused, false);

  std::vector<Tensor> per_layer;
  std::map<int, Tensor> raw;
  for (int k : m.layers()) {
    ad::Var mv = training::anomaly_map(tf.local.at(k), stud.at(k));
    per_layer.push_back(mv.value());
    if (keep_layer_maps) raw.emplace(k, mv.value());
  }
  Tensor total = aggregate(per_layer, S, m.config().smoothing_sigma);

  std::vector<AnomalyMap> out(static_cast<size_t>(B));
  const int64_t plane = S * S;
  for (int64_t b = 0; b < B; ++b) {
    AnomalyMap& am = out[static_cast<size_t>(b)];
    am.map = Tensor({S, S});
    std::memcpy(am.map.data(), total.data() + b * plane,
                static_cast<size_t>(plane) * sizeof(double));
    double mx = am.map[0];
    for (int64_t i = 0; i < plane; ++i) {
      const double v = am.map[i];
      HT_CHECK(std::isfinite(v), "scoring: non-finite anomaly map entry");
      HT_CHECK(v >= -1e-6, "scoring: anomaly map entry below -1e-6");
      if (v > mx) mx = v;
    }
    am.image_score = mx;
    for (const auto& [k, t] : raw) {
      const int64_t h = t.dim(1), w = t.dim(2);
      Tensor lm({h, w});
      std::memcpy(lm.data(), t.data() + b * h * w,
                  static_cast<size_t>(h * w) * sizeof(double));
      am.layer_maps.emplace(k, std::move(lm));
    }
  }
  return out;
}

void write_scores_csv(const std::string& path,
                      const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream f(path);
  HT_CHECK(f.good(), "scoring: cannot write " + path);
  f << "image,score\n";
  char buf[64];
  for (const auto& [name, s] : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", s);
    f << name << "," << buf << "\n";
  }
  f.flush();
  HT_CHECK(f.good(), "scoring: write failed for " + path);
}

void export_heatmap(const AnomalyMap& am, const Tensor& image_chw,
                    const std::string& path) {
  HT_CHECK(am.map.ndim() == 2, "scoring: heatmap expects a (H,W) map");
  HT_CHECK(image_chw.ndim() == 3 && image_chw.dim(0) == 3,
           "scoring: heatmap expects a (3,H,W) image");
  HT_CHECK(image_chw.dim(1) == am.map.dim(0) && image_chw.dim(2) == am.map.dim(1),
           "scoring: map and image spatial dims differ");
  img::export_heatmap(path, am.map, image_chw);
}

}  // namespace hetnet::scoring
