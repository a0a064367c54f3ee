#include "hetnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "hetnet/common.hpp"
#include "hetnet/scoring.hpp"

namespace hetnet::metrics {

namespace {

void check_pair(const Tensor& map, const Tensor& mask) {
  HT_CHECK(map.ndim() == 2 && mask.ndim() == 2,
           "metrics: maps and masks must be (H,W)");
  HT_CHECK(map.same_shape(mask), "metrics: map and mask shapes differ");
  for (int64_t i = 0; i < mask.numel(); ++i)
    HT_CHECK(mask[i] == 0.0 || mask[i] == 1.0,
             "metrics: mask values must be exactly 0 or 1");
  for (int64_t i = 0; i < map.numel(); ++i)
    HT_CHECK(std::isfinite(map[i]), "metrics: non-finite map value");
}

struct Component {
  int64_t image = 0;
  std::vector<int64_t> pixels;
};

std::vector<Component> find_components(const std::vector<Tensor>& masks,
                                       int connectivity) {
  std::vector<Component> comps;
  for (size_t n = 0; n < masks.size(); ++n) {
    const Tensor& mask = masks[n];
    const int64_t h = mask.dim(0), w = mask.dim(1);
    std::vector<char> seen(static_cast<size_t>(h * w), 0);
    for (int64_t start = 0; start < h * w; ++start) {
      if (mask[start] != 1.0 || seen[static_cast<size_t>(start)]) continue;
      Component c;
      c.image = static_cast<int64_t>(n);
      std::vector<int64_t> stack{start};
      seen[static_cast<size_t>(start)] = 1;
      while (!stack.empty()) {
        const int64_t p = stack.back();
        stack.pop_back();
        c.pixels.push_back(p);
        const int64_t y = p / w, x = p % w;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            if (connectivity == 4 && dy != 0 && dx != 0) continue;
            const int64_t ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const int64_t q = ny * w + nx;
            if (mask[q] == 1.0 && !seen[static_cast<size_t>(q)]) {
              seen[static_cast<size_t>(q)] = 1;
              stack.push_back(q);
            }
          }
        }
      }
      comps.push_back(std::move(c));
    }
  }
  return comps;
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const int64_t n = static_cast<int64_t>(scores.size());
  HT_CHECK(n > 0 && scores.size() == labels.size(),
           "auroc: scores and labels must be equal-length and non-empty");
  int64_t n_pos = 0;
  for (int64_t i = 0; i < n; ++i) {
    HT_CHECK(labels[i] == 0 || labels[i] == 1, "auroc: labels must be 0 or 1");
    HT_CHECK(std::isfinite(scores[i]), "auroc: non-finite score");
    n_pos += labels[i];
  }
  const int64_t n_neg = n - n_pos;
  HT_CHECK(n_pos > 0 && n_neg > 0,
           "auroc: undefined with a single class; need both labels");

  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int64_t a, int64_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (int64_t k = i; k < j; ++k)
      if (labels[idx[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u =
      rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double pixel_auroc(const std::vector<Tensor>& maps,
                   const std::vector<Tensor>& masks) {
  HT_CHECK(!maps.empty() && maps.size() == masks.size(),
           "pixel_auroc: need matching non-empty map and mask lists");
  std::vector<double> scores;
  std::vector<int> labels;
  for (size_t n = 0; n < maps.size(); ++n) {
    check_pair(maps[n], masks[n]);
    for (int64_t i = 0; i < maps[n].numel(); ++i) {
      scores.push_back(maps[n][i]);
      labels.push_back(masks[n][i] == 1.0 ? 1 : 0);
    }
  }
  return auroc(scores, labels);
}

double pro(const std::vector<Tensor>& maps, const std::vector<Tensor>& masks,
           const ProOptions& opt) {
  HT_CHECK(!maps.empty() && maps.size() == masks.size(),
           "pro: need matching non-empty map and mask lists");
  HT_CHECK(opt.connectivity == 4 || opt.connectivity == 8,
           "pro: connectivity must be 4 or 8");
  HT_CHECK(opt.fpr_limit > 0.0 && opt.fpr_limit <= 1.0,
           "pro: fpr_limit must lie in (0,1]");
  HT_CHECK(opt.n_thresholds >= 2, "pro: need at least 2 thresholds");

  double lo = maps[0][0], hi = maps[0][0];
  int64_t n_normal = 0;
  for (size_t n = 0; n < maps.size(); ++n) {
    check_pair(maps[n], masks[n]);
    for (int64_t i = 0; i < maps[n].numel(); ++i) {
      lo = std::min(lo, maps[n][i]);
      hi = std::max(hi, maps[n][i]);
      if (masks[n][i] == 0.0) ++n_normal;
    }
  }
  const std::vector<Component> comps = find_components(masks, opt.connectivity);
  HT_CHECK(!comps.empty(), "pro: no defect regions in the masks");
  HT_CHECK(n_normal > 0, "pro: no normal pixels to measure FPR on");

  std::vector<double> ts;
  for (int i = 0; i < opt.n_thresholds; ++i)
    ts.push_back(lo + (hi - lo) * static_cast<double>(i) /
                          static_cast<double>(opt.n_thresholds - 1));
  ts.push_back(lo);
  ts.push_back(hi);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  // Descending threshold order walks the curve from (0,0) toward FPR 1.
  std::vector<double> fprs{0.0}, overlaps{0.0};
  for (auto it = ts.rbegin(); it != ts.rend(); ++it) {
    const double t = *it;
    int64_t false_pos = 0;
    for (size_t n = 0; n < maps.size(); ++n)
      for (int64_t i = 0; i < maps[n].numel(); ++i)
        if (masks[n][i] == 0.0 && maps[n][i] >= t) ++false_pos;
    double overlap_sum = 0.0;
    for (const Component& c : comps) {
      int64_t covered = 0;
      const Tensor& map = maps[static_cast<size_t>(c.image)];
      for (int64_t p : c.pixels)
        if (map[p] >= t) ++covered;
      overlap_sum +=
          static_cast<double>(covered) / static_cast<double>(c.pixels.size());
    }
    fprs.push_back(static_cast<double>(false_pos) / static_cast<double>(n_normal));
    overlaps.push_back(overlap_sum / static_cast<double>(comps.size()));
  }

  double area = 0.0;
  for (size_t i = 1; i < fprs.size(); ++i) {
    double f0 = fprs[i - 1], f1 = fprs[i];
    double o0 = overlaps[i - 1], o1 = overlaps[i];
    if (f0 >= opt.fpr_limit) break;
    if (f1 > opt.fpr_limit) {
      o1 = f1 > f0 ? o0 + (o1 - o0) * (opt.fpr_limit - f0) / (f1 - f0) : o0;
      f1 = opt.fpr_limit;
    }
    area += 0.5 * (o0 + o1) * (f1 - f0);
  }
  return area / opt.fpr_limit;
}

EvalReport evaluate(const model::HetNet& m, const data::DatasetIndex& test,
                    const std::string& out_dir) {
  const ExperimentConfig& cfg = m.config();
  HT_CHECK(test.size() > 0, "evaluate: test set is empty");
  bool any_good = false, any_defect = false;
  for (const auto& e : test.entries) (e.is_defect() ? any_defect : any_good) = true;
  HT_CHECK(any_good && any_defect,
           "evaluate: test set needs both good and defect images");

  const int64_t S = cfg.image_size;
  std::vector<double> img_scores;
  std::vector<int> img_labels;
  std::vector<Tensor> maps, masks;
  for (int64_t begin = 0; begin < test.size(); begin += cfg.batch_size) {
    const int64_t end = std::min(begin + cfg.batch_size, test.size());
    Tensor batch({end - begin, 3, S, S});
    std::vector<data::Sample> samples;
    for (int64_t i = begin; i < end; ++i) {
      const auto& entry = test.entries[static_cast<size_t>(i)];
      data::Sample s =
          data::load_sample(entry, S, cfg.norm_mean, cfg.norm_std);
      HT_CHECK(!entry.is_defect() || s.has_mask,
               "evaluate: defect image has no mask: " + entry.image_path);
      std::copy(s.image.data(), s.image.data() + s.image.numel(),
                batch.data() + (i - begin) * 3 * S * S);
      samples.push_back(std::move(s));
    }
    auto scored = scoring::score(m, batch);
    for (int64_t i = begin; i < end; ++i) {
      const auto& entry = test.entries[static_cast<size_t>(i)];
      auto& am = scored[static_cast<size_t>(i - begin)];
      img_scores.push_back(am.image_score);
      img_labels.push_back(entry.is_defect() ? 1 : 0);
      maps.push_back(std::move(am.map));
      data::Sample& s = samples[static_cast<size_t>(i - begin)];
      masks.push_back(s.has_mask ? std::move(s.mask) : Tensor({S, S}));
    }
  }

  EvalReport r;
  r.category = cfg.category;
  r.image_auroc = auroc(img_scores, img_labels);
  r.pixel_auroc = pixel_auroc(maps, masks);
  r.pro = pro(maps, masks,
              {cfg.pro_fpr_limit, cfg.pro_n_thresholds, cfg.pro_connectivity});
  r.n_images = test.size();
  r.n_defect = static_cast<int64_t>(
      std::count(img_labels.begin(), img_labels.end(), 1));
  r.n_pixels = test.size() * S * S;
  r.pro_fpr_limit = cfg.pro_fpr_limit;
  r.pro_n_thresholds = cfg.pro_n_thresholds;
  r.pro_connectivity = cfg.pro_connectivity;
  r.smoothing_sigma = cfg.smoothing_sigma;
  r.config_fingerprint = config_fingerprint(cfg);

  std::filesystem::create_directories(out_dir);
  nlohmann::json j{{"category", r.category},
                   {"image_auroc", r.image_auroc},
                   {"pixel_auroc", r.pixel_auroc},
                   {"pro", r.pro},
                   {"n_images", r.n_images},
                   {"n_defect", r.n_defect},
                   {"n_pixels", r.n_pixels},
                   {"pro_fpr_limit", r.pro_fpr_limit},
                   {"pro_n_thresholds", r.pro_n_thresholds},
                   {"pro_connectivity", r.pro_connectivity},
                   {"smoothing_sigma", r.smoothing_sigma},
                   {"config_fingerprint", r.config_fingerprint}};
  const auto json_path = std::filesystem::path(out_dir) / "report.json";
  std::ofstream jf(json_path);
  HT_CHECK(jf.good(), "evaluate: cannot write " + json_path.string());
  jf << j.dump(2) << "\n";

  const auto csv_path = std::filesystem::path(out_dir) / "report.csv";
  std::ofstream cf(csv_path);
  HT_CHECK(cf.good(), "evaluate: cannot write " + csv_path.string());
  cf << "category,image_auroc,pixel_auroc,pro,n_images,n_defect,n_pixels,"
        "pro_fpr_limit,pro_n_thresholds,pro_connectivity,smoothing_sigma,"
        "config_fingerprint\n";
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%lld,%lld,%lld,%g,%d,%d,%g,%s\n",
                r.category.c_str(), r.image_auroc, r.pixel_auroc, r.pro,
                static_cast<long long>(r.n_images),
                static_cast<long long>(r.n_defect),
                static_cast<long long>(r.n_pixels), r.pro_fpr_limit,
                r.pro_n_thresholds, r.pro_connectivity, r.smoothing_sigma,
                r.config_fingerprint.c_str());
  cf << buf;
  return r;
}

}  // namespace hetnet::metrics
