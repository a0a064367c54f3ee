#include "hetnet/lmgn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "hetnet/common.hpp"
#include "hetnet/container.hpp"

namespace hetnet::lmgn {

namespace {

// Row-major lower-triangular factorization; fails on non-SPD input.
bool cholesky_lower(int64_t n, const double* a, double* l) {
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (int64_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return false;
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
    for (int64_t j = i + 1; j < n; ++j) l[i * n + j] = 0.0;
  }
  return true;
}

void factor_stats(GaussianFieldStats& stats) {
  for (auto& ls : stats.per_layer) {
    const int64_t C = ls.dims.c, H = ls.dims.h, W = ls.dims.w;
    if (stats.mode == CovarianceMode::kFull) {
      ls.chol = Tensor({H, W, C, C});
      std::vector<double> a(static_cast<size_t>(C) * C);
      for (int64_t p = 0; p < H * W; ++p) {
        const double* src = ls.cov.data() + p * C * C;
        std::memcpy(a.data(), src, a.size() * sizeof(double));
        for (int64_t c = 0; c < C; ++c) a[static_cast<size_t>(c * C + c)] += stats.epsilon;
        if (!cholesky_lower(C, a.data(), ls.chol.data() + p * C * C))
          fail("lmgn: covariance at layer " + std::to_string(ls.layer) + " position (" +
               std::to_string(p / W) + "," + std::to_string(p % W) +
               ") is not positive definite after adding epsilon=" + std::to_string(stats.epsilon));
      }
    } else {
      ls.chol = Tensor({C, H, W});
      for (int64_t i = 0; i < ls.var.numel(); ++i) {
        const double v = ls.var.data()[i] + stats.epsilon;
        if (v <= 0.0 || !std::isfinite(v))
          fail("lmgn: variance at layer " + std::to_string(ls.layer) + " index " +
               std::to_string(i) + " is not positive after adding epsilon");
        ls.chol.data()[i] = std::sqrt(v);
      }
    }
  }
}

uint32_t stats_checksum(const GaussianFieldStats& stats) {
  uint32_t crc = 0;
  for (const auto& ls : stats.per_layer) {
    const std::string tag = "layer" + std::to_string(ls.layer);
    crc = io::crc32(tag.data(), tag.size(), crc);
    crc = io::crc32(ls.mean.data(), static_cast<size_t>(ls.mean.numel()) * sizeof(double), crc);
    const Tensor& second = stats.mode == CovarianceMode::kFull ? ls.cov : ls.var;
    crc = io::crc32(second.data(), static_cast<size_t>(second.numel()) * sizeof(double), crc);
  }
  return crc;
}

}  // namespace

const LayerPatch& NoisePatchPlan::layer(int k) const {
  for (const auto& p : patches)
    if (p.layer == k) return p;
  fail("lmgn: plan has no patch for layer " + std::to_string(k));
}

const LayerStats& GaussianFieldStats::layer(int k) const {
  for (const auto& ls : per_layer)
    if (ls.layer == k) return ls;
  fail("lmgn: stats hold no layer " + std::to_string(k));
}

std::map<int, LayerDims> GaussianFieldStats::dims() const {
  std::map<int, LayerDims> d;
  for (const auto& ls : per_layer) d[ls.layer] = ls.dims;
  return d;
}

NoisePatchPlan make_plan(const std::map<int, LayerDims>& dims, double frac_lo, double frac_hi,
                         RngStream& rng) {
  HT_CHECK(!dims.empty(), "lmgn: plan needs at least one layer");
  HT_CHECK(frac_lo > 0.0 && frac_lo <= frac_hi && frac_hi <= 1.0,
           "lmgn: patch side fractions must satisfy 0 < lo <= hi <= 1");
  NoisePatchPlan plan;
  plan.substream = rng.next_u64();
  for (const auto& [k, d] : dims) {
    HT_CHECK(d.c > 0 && d.h > 0 && d.w > 0, "lmgn: layer " + std::to_string(k) + " has empty dims");
    const int64_t lo = static_cast<int64_t>(std::ceil(frac_lo * static_cast<double>(d.h)));
    const int64_t hi =
        std::min<int64_t>(static_cast<int64_t>(std::floor(frac_hi * static_cast<double>(d.h))),
                          std::min(d.h, d.w));
    HT_CHECK(hi >= 1, "lmgn: layer " + std::to_string(k) + " patch side would be 0 (map " +
                          std::to_string(d.h) + "x" + std::to_string(d.w) + ")");
    HT_CHECK(lo <= hi, "lmgn: layer " + std::to_string(k) + " has empty patch side range [" +
                           std::to_string(lo) + "," + std::to_string(hi) + "]");
    LayerPatch p;
    p.layer = k;
    p.dims = d;
    p.side = rng.uniform_int(lo, hi);
    p.top = rng.uniform_int(0, d.h - p.side);
    p.left = rng.uniform_int(0, d.w - p.side);
    plan.patches.push_back(p);
  }
  return plan;
}

GaussianFieldStats fit_stats(const teacher::Encoder& local, const data::DatasetIndex& train,
                             const ExperimentConfig& cfg) {
  HT_CHECK(train.size() > 0, "lmgn: cannot fit statistics on an empty training set");
  const std::vector<int> layers = cfg.effective_noise_layers();

  GaussianFieldStats stats;
  stats.backbone = local.backbone();
  stats.layers = layers;
  stats.mode = cfg.covariance_mode;
  stats.epsilon = cfg.lmgn_epsilon;
  stats.sample_count = train.size();

  std::map<int, Tensor> sum_x, sum_xx;
  std::map<int, LayerDims> dims;

  const int64_t N = train.size();
  const int64_t bs = std::max<int64_t>(1, cfg.batch_size);
  std::vector<double> xp;
  for (int64_t start = 0; start < N; start += bs) {
    const int64_t b = std::min(bs, N - start);
    Tensor batch({b, 3, cfg.image_size, cfg.image_size});
    for (int64_t i = 0; i < b; ++i) {
      data::Sample s = data::load_sample(train.entries[static_cast<size_t>(start + i)],
                                         cfg.image_size, cfg.norm_mean, cfg.norm_std);
      std::memcpy(batch.data() + i * s.image.numel(), s.image.data(),
                  static_cast<size_t>(s.image.numel()) * sizeof(double));
    }
    teacher::Pyramid pyr = local.extract(batch, layers);
    for (int k : layers) {
      const Tensor& f = pyr.at(k);
      const int64_t C = f.dim(1), H = f.dim(2), W = f.dim(3), HW = H * W;
      if (!sum_x.count(k)) {
        dims[k] = {C, H, W};
        sum_x.emplace(k, Tensor({C, H, W}));
        sum_xx.emplace(k, cfg.covariance_mode == CovarianceMode::kFull ? Tensor({H, W, C, C})
                                                                       : Tensor({C, H, W}));
      }
      double* sx = sum_x.at(k).data();
      double* sxx = sum_xx.at(k).data();
      xp.resize(static_cast<size_t>(C));
      for (int64_t i = 0; i < b; ++i) {
        const double* x = f.data() + i * C * HW;
        for (int64_t n = 0; n < C * HW; ++n) sx[n] += x[n];
        if (cfg.covariance_mode == CovarianceMode::kFull) {
          for (int64_t p = 0; p < HW; ++p) {
            for (int64_t c = 0; c < C; ++c) xp[static_cast<size_t>(c)] = x[c * HW + p];
            double* block = sxx + p * C * C;
            for (int64_t r = 0; r < C; ++r) {
              const double xr = xp[static_cast<size_t>(r)];
              double* row = block + r * C;
              for (int64_t c = 0; c < C; ++c) row[c] += xr * xp[static_cast<size_t>(c)];
            }
          }
        } else {
          for (int64_t n = 0; n < C * HW; ++n) sxx[n] += x[n] * x[n];
        }
      }
    }
  }

  for (int k : layers) {
    LayerStats ls;
    ls.layer = k;
    ls.dims = dims.at(k);
    const int64_t C = ls.dims.c, HW = ls.dims.h * ls.dims.w;
    ls.mean = std::move(sum_x.at(k));
    for (int64_t n = 0; n < ls.mean.numel(); ++n) ls.mean.data()[n] /= static_cast<double>(N);
    const double* mu = ls.mean.data();
    if (cfg.covariance_mode == CovarianceMode::kFull) {
      ls.cov = std::move(sum_xx.at(k));
      double* cv = ls.cov.data();
      for (int64_t p = 0; p < HW; ++p) {
        double* block = cv + p * C * C;
        for (int64_t r = 0; r < C; ++r)
          for (int64_t c = 0; c < C; ++c) {
            const double raw = block[r * C + c] -
                               static_cast<double>(N) * mu[r * HW + p] * mu[c * HW + p];
            block[r * C + c] = N > 1 ? raw / static_cast<double>(N - 1) : 0.0;
          }
      }
    } else {
      ls.var = std::move(sum_xx.at(k));
      double* vr = ls.var.data();
      for (int64_t n = 0; n < C * HW; ++n) {
        const double raw = vr[n] - static_cast<double>(N) * mu[n] * mu[n];
        vr[n] = N > 1 ? std::max(0.0, raw / static_cast<double>(N - 1)) : 0.0;
      }
    }
    stats.per_layer.push_back(std::move(ls));
  }

  factor_stats(stats);
  return stats;
}

void save_stats(const std::string& path, const GaussianFieldStats& stats) {
  io::Container c;
  c.meta["kind"] = "noise_stats";
  c.meta["backbone"] = stats.backbone;
  c.meta["layers"] = stats.layers;
  c.meta["epsilon"] = stats.epsilon;
  c.meta["sample_count"] = stats.sample_count;
  c.meta["covariance_mode"] = stats.mode == CovarianceMode::kFull ? "full" : "diagonal";
  c.meta["stats_checksum"] = stats_checksum(stats);
  for (const auto& ls : stats.per_layer) {
    const std::string base = "layer" + std::to_string(ls.layer);
    c.add(base + ".mean", ls.mean);
    if (stats.mode == CovarianceMode::kFull)
      c.add(base + ".cov", ls.cov);
    else
      c.add(base + ".var", ls.var);
  }
  io::save_container(path, c);
}

GaussianFieldStats load_stats(const std::string& path) {
  io::Container c = io::load_container(path);
  HT_CHECK(c.meta.value("kind", "") == "noise_stats",
           "lmgn: " + path + " is not a noise statistics file");
  GaussianFieldStats stats;
  stats.backbone = c.meta.at("backbone").get<std::string>();
  stats.layers = c.meta.at("layers").get<std::vector<int>>();
  stats.epsilon = c.meta.at("epsilon").get<double>();
  stats.sample_count = c.meta.at("sample_count").get<int64_t>();
  const std::string mode = c.meta.at("covariance_mode").get<std::string>();
  stats.mode = mode == "full" ? CovarianceMode::kFull : CovarianceMode::kDiagonal;
  for (int k : stats.layers) {
    const std::string base = "layer" + std::to_string(k);
    LayerStats ls;
    ls.layer = k;
    HT_CHECK(c.has(base + ".mean"), "lmgn: stats file is missing " + base + ".mean");
    ls.mean = c.array(base + ".mean");
    HT_CHECK(ls.mean.ndim() == 3, "lmgn: " + base + ".mean must be (C,H,W)");
    ls.dims = {ls.mean.dim(0), ls.mean.dim(1), ls.mean.dim(2)};
    if (stats.mode == CovarianceMode::kFull) {
      HT_CHECK(c.has(base + ".cov"), "lmgn: stats file is missing " + base + ".cov");
      ls.cov = c.array(base + ".cov");
      const std::vector<int64_t> want{ls.dims.h, ls.dims.w, ls.dims.c, ls.dims.c};
      HT_CHECK(ls.cov.shape() == want, "lmgn: " + base + ".cov has shape " +
                                           shape_str(ls.cov.shape()) + " but the mean implies " +
                                           shape_str(want));
    } else {
      HT_CHECK(c.has(base + ".var"), "lmgn: stats file is missing " + base + ".var");
      ls.var = c.array(base + ".var");
      HT_CHECK(ls.var.shape() == ls.mean.shape(), "lmgn: " + base + ".var shape mismatch");
    }
    stats.per_layer.push_back(std::move(ls));
  }
  const uint32_t want = c.meta.at("stats_checksum").get<uint32_t>();
  HT_CHECK(stats_checksum(stats) == want,
           "lmgn: stats checksum mismatch in " + path + " (file corrupt or edited)");
  factor_stats(stats);
  return stats;
}

NoisePyramid sample_noise(const GaussianFieldStats& stats, const NoisePatchPlan& plan,
                          RngStream& rng, double scale) {
  NoisePyramid out;
  std::vector<double> z;
  for (const auto& p : plan.patches) {
    const LayerStats& ls = stats.layer(p.layer);
    HT_CHECK(ls.dims == p.dims, "lmgn: plan dims disagree with stats at layer " +
                                    std::to_string(p.layer));
    const int64_t C = ls.dims.c, H = ls.dims.h, W = ls.dims.w, HW = H * W;
    Tensor xi({C, H, W});
    Tensor pm({C, H, W});
    z.resize(static_cast<size_t>(C));
    const double* mu = ls.mean.data();
    for (int64_t i = p.top; i < p.top + p.side; ++i)
      for (int64_t j = p.left; j < p.left + p.side; ++j) {
        const int64_t pos = i * W + j;
        for (int64_t c = 0; c < C; ++c) z[static_cast<size_t>(c)] = rng.normal();
        for (int64_t c = 0; c < C; ++c) {
          double s = 0.0;
          if (stats.mode == CovarianceMode::kFull) {
            const double* lrow = ls.chol.data() + pos * C * C + c * C;
            for (int64_t k = 0; k <= c; ++k) s += lrow[k] * z[static_cast<size_t>(k)];
          } else {
            s = ls.chol.data()[c * HW + pos] * z[static_cast<size_t>(c)];
          }
          xi.data()[c * HW + pos] = mu[c * HW + pos] + scale * s;
          pm.data()[c * HW + pos] = mu[c * HW + pos];
        }
      }
    out.xi.emplace(p.layer, std::move(xi));
    out.patch_mean.emplace(p.layer, std::move(pm));
  }
  return out;
}

NoisePyramid standard_normal_noise(const NoisePatchPlan& plan, RngStream& rng, double scale) {
  NoisePyramid out;
  for (const auto& p : plan.patches) {
    const int64_t C = p.dims.c, W = p.dims.w, HW = p.dims.h * W;
    Tensor xi({C, p.dims.h, W});
    for (int64_t i = p.top; i < p.top + p.side; ++i)
      for (int64_t j = p.left; j < p.left + p.side; ++j)
        for (int64_t c = 0; c < C; ++c) xi.data()[c * HW + i * W + j] = scale * rng.normal();
    out.xi.emplace(p.layer, std::move(xi));
    out.patch_mean.emplace(p.layer, Tensor({C, p.dims.h, W}));
  }
  return out;
}

std::map<int, Tensor> inject(const std::map<int, Tensor>& f, const NoisePyramid& noise,
                             NoiseMode mode) {
  for (const auto& [k, t] : noise.xi)
    HT_CHECK(f.count(k), "lmgn: noise layer " + std::to_string(k) + " has no feature layer");
  std::map<int, Tensor> out;
  for (const auto& [k, t] : f) {
    Tensor y = t;
    auto it = noise.xi.find(k);
    if (it != noise.xi.end()) {
      HT_CHECK(it->second.shape() == t.shape(),
               "lmgn: layer " + std::to_string(k) + " noise shape " +
                   shape_str(it->second.shape()) + " does not match features " +
                   shape_str(t.shape()));
      const double* n = it->second.data();
      for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] += n[i];
      if (mode == NoiseMode::kAddCentered) {
        const double* pm = noise.patch_mean.at(k).data();
        for (int64_t i = 0; i < y.numel(); ++i) y.data()[i] -= pm[i];
      }
    }
    out.emplace(k, std::move(y));
  }
  return out;
}

}  // namespace hetnet::lmgn
