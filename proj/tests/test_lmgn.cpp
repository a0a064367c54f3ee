#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "hetnet/container.hpp"
#include "hetnet/dataset.hpp"
#include "hetnet/lmgn.hpp"
#include "hetnet/rng.hpp"

using namespace hetnet;
namespace fs = std::filesystem;

namespace {

struct CorpusFixture {
  fs::path root;
  ExperimentConfig cfg;
  teacher::Encoder enc = teacher::Encoder::load("toy_cnn", "scratch", 3);
  data::DatasetIndex train;

  CorpusFixture() {
    root = fs::temp_directory_path() /
           ("hetnet_lmgn_" + std::to_string(RngStream(::getpid()).next_u64()));
    SynthSpec spec;
    spec.n_train = 50;
    spec.n_test_good = 1;
    spec.n_test_defect = 1;
    data::synth_corpus(root.string(), "cast0", spec, 64, 123);
    cfg = config_from_text("dataset_root=" + root.string() +
                           "\ncategory=cast0\nimage_size=32\nseed=3\n");
    train = data::scan_layout(root.string(), "cast0").first;
  }
  ~CorpusFixture() { fs::remove_all(root); }

  Tensor features(const data::DatasetEntry& e, int layer) const {
    data::Sample s = data::load_sample(e, cfg.image_size, cfg.norm_mean, cfg.norm_std);
    Tensor b({1, 3, cfg.image_size, cfg.image_size});
    std::memcpy(b.data(), s.image.data(), static_cast<size_t>(s.image.numel()) * sizeof(double));
    return enc.extract(b, {layer}).at(layer);
  }
};

std::map<int, lmgn::LayerDims> toy_dims() {
  return {{1, {16, 16, 16}}, {2, {32, 8, 8}}, {3, {64, 4, 4}}};
}

}  // namespace

TEST_CASE("patch plans stay inside bounds across many draws") {
  RngStream rng(derive_key(1, "plan_test"));
  const auto dims = toy_dims();
  for (int t = 0; t < 100; ++t) {
    auto plan = lmgn::make_plan(dims, 0.125, 0.5, rng);
    REQUIRE(plan.patches.size() == 3);
    for (const auto& p : plan.patches) {
      const auto& d = dims.at(p.layer);
      const int64_t lo = static_cast<int64_t>(std::ceil(0.125 * static_cast<double>(d.h)));
      const int64_t hi = static_cast<int64_t>(std::floor(0.5 * static_cast<double>(d.h)));
      CHECK(p.side >= lo);
      CHECK(p.side <= hi);
      CHECK(p.top >= 0);
      CHECK(p.left >= 0);
      CHECK(p.top + p.side <= d.h);
      CHECK(p.left + p.side <= d.w);
    }
  }

  CHECK_THROWS_WITH_AS(lmgn::make_plan(dims, 0.0, 0.5, rng), doctest::Contains("fractions"),
                       Error);
  std::map<int, lmgn::LayerDims> tiny{{1, {4, 1, 1}}};
  CHECK_THROWS_WITH_AS(lmgn::make_plan(tiny, 0.125, 0.5, rng), doctest::Contains("would be 0"),
                       Error);
  std::map<int, lmgn::LayerDims> gap{{1, {4, 4, 4}}};
  CHECK_THROWS_WITH_AS(lmgn::make_plan(gap, 0.3, 0.4, rng), doctest::Contains("empty patch side"),
                       Error);
}

TEST_CASE("one-pass moment fit matches a two-pass oracle") {
  CorpusFixture fx;
  auto stats = lmgn::fit_stats(fx.enc, fx.train, fx.cfg);
  CHECK(stats.backbone == "toy_cnn");
  CHECK(stats.sample_count == 50);
  REQUIRE(stats.layers == std::vector<int>{1, 2, 3});

  // Two-pass oracle on layer 2: gather every feature map, then mean and
  // centered covariance in separate passes.
  const int k = 2;
  std::vector<Tensor> feats;
  for (const auto& e : fx.train.entries) feats.push_back(fx.features(e, k));
  const int64_t C = feats[0].dim(1), H = feats[0].dim(2), W = feats[0].dim(3), HW = H * W;
  const auto N = static_cast<double>(feats.size());

  Tensor mu({C, H, W});
  for (const auto& f : feats)
    for (int64_t n = 0; n < mu.numel(); ++n) mu.data()[n] += f.data()[n] / N;

  const auto& ls = stats.layer(k);
  double max_mu_dev = 0.0;
  for (int64_t n = 0; n < mu.numel(); ++n)
    max_mu_dev = std::max(max_mu_dev, std::abs(mu.data()[n] - ls.mean.data()[n]));
  CHECK(max_mu_dev < 1e-9);

  RngStream pick(derive_key(7, "positions"));
  double max_cov_dev = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int64_t p = pick.uniform_int(0, HW - 1);
    std::vector<double> cov(static_cast<size_t>(C) * C, 0.0);
    for (const auto& f : feats)
      for (int64_t r = 0; r < C; ++r)
        for (int64_t c = 0; c < C; ++c)
          cov[static_cast<size_t>(r * C + c)] += (f.data()[r * HW + p] - mu.data()[r * HW + p]) *
                                                 (f.data()[c * HW + p] - mu.data()[c * HW + p]) /
                                                 (N - 1.0);
    const double* got = ls.cov.data() + p * C * C;
    for (int64_t n = 0; n < C * C; ++n)
      max_cov_dev = std::max(max_cov_dev, std::abs(cov[static_cast<size_t>(n)] - got[n]));
  }
  CHECK(max_cov_dev < 1e-9);

  SUBCASE("diagonal mode equals the full-covariance diagonal") {
    ExperimentConfig dcfg = fx.cfg;
    dcfg.covariance_mode = CovarianceMode::kDiagonal;
    auto dstats = lmgn::fit_stats(fx.enc, fx.train, dcfg);
    const auto& dls = dstats.layer(k);
    double dev = 0.0;
    for (int64_t p = 0; p < HW; ++p)
      for (int64_t c = 0; c < C; ++c)
        dev = std::max(dev, std::abs(dls.var.data()[c * HW + p] -
                                     ls.cov.data()[(p * C + c) * C + c]));
    CHECK(dev < 1e-9);
  }

  SUBCASE("image order does not change the fit") {
    data::DatasetIndex shuffled = fx.train;
    RngStream sh(derive_key(9, "shuffle"));
    for (size_t i = shuffled.entries.size(); i > 1; --i)
      std::swap(shuffled.entries[i - 1],
                shuffled.entries[static_cast<size_t>(sh.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    auto stats2 = lmgn::fit_stats(fx.enc, shuffled, fx.cfg);
    double dev = 0.0;
    for (int layer : {1, 2, 3}) {
      const auto &a = stats.layer(layer), &b = stats2.layer(layer);
      for (int64_t n = 0; n < a.mean.numel(); ++n)
        dev = std::max(dev, std::abs(a.mean.data()[n] - b.mean.data()[n]));
      for (int64_t n = 0; n < a.cov.numel(); ++n)
        dev = std::max(dev, std::abs(a.cov.data()[n] - b.cov.data()[n]));
    }
    CHECK(dev < 1e-6);
  }
}

TEST_CASE("single- and two-sample fits hit the degenerate formulas") {
  CorpusFixture fx;
  data::DatasetIndex one = fx.train;
  one.entries.resize(1);
  auto s1 = lmgn::fit_stats(fx.enc, one, fx.cfg);
  const Tensor f = fx.features(one.entries[0], 1);
  const auto& ls = s1.layer(1);
  for (int64_t n = 0; n < ls.mean.numel(); ++n)
    CHECK(ls.mean.data()[n] == doctest::Approx(f.data()[n]).epsilon(1e-12));
  for (int64_t n = 0; n < ls.cov.numel(); ++n) CHECK(ls.cov.data()[n] == 0.0);
  // With zero sample covariance the factor is sqrt(eps) I.
  const int64_t C = ls.dims.c;
  CHECK(ls.chol.data()[0] == doctest::Approx(std::sqrt(s1.epsilon)).epsilon(1e-12));
  CHECK(ls.chol.data()[1] == 0.0);

  data::DatasetIndex two = fx.train;
  two.entries.resize(2);
  auto s2 = lmgn::fit_stats(fx.enc, two, fx.cfg);
  const Tensor a = fx.features(two.entries[0], 1);
  const Tensor b = fx.features(two.entries[1], 1);
  const auto& ls2 = s2.layer(1);
  const int64_t HW = ls2.dims.h * ls2.dims.w;
  for (int64_t n = 0; n < ls2.mean.numel(); ++n)
    CHECK(ls2.mean.data()[n] ==
          doctest::Approx(0.5 * (a.data()[n] + b.data()[n])).epsilon(1e-12));
  // N=2 sample covariance is (a-b)(a-b)^T / 2 at every position.
  RngStream pick(derive_key(11, "positions2"));
  for (int t = 0; t < 5; ++t) {
    const int64_t p = pick.uniform_int(0, HW - 1);
    for (int64_t r = 0; r < C; ++r)
      for (int64_t c = 0; c < C; ++c) {
        const double want = 0.5 * (a.data()[r * HW + p] - b.data()[r * HW + p]) *
                            (a.data()[c * HW + p] - b.data()[c * HW + p]);
        CHECK(ls2.cov.data()[(p * C + c) * C + r] == doctest::Approx(want).epsilon(1e-9));
      }
  }
}

TEST_CASE("draws reproduce hand-built statistics") {
  // Small synthetic field: C=3, one interesting position.
  const int64_t C = 3, H = 4, W = 4, HW = H * W;
  lmgn::GaussianFieldStats stats;
  stats.backbone = "toy_cnn";
  stats.layers = {1};
  stats.epsilon = 0.01;
  stats.sample_count = 10;
  lmgn::LayerStats ls;
  ls.layer = 1;
  ls.dims = {C, H, W};
  ls.mean = Tensor({C, H, W});
  ls.cov = Tensor({H, W, C, C});
  const double mu[3] = {1.0, -2.0, 0.5};
  const double A[9] = {0.9, 0.0, 0.0, 0.3, 0.7, 0.0, -0.2, 0.1, 0.5};
  for (int64_t p = 0; p < HW; ++p)
    for (int64_t r = 0; r < C; ++r) {
      ls.mean.data()[r * HW + p] = mu[r];
      for (int64_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (int64_t k = 0; k < C; ++k) s += A[r * 3 + k] * A[c * 3 + k];
        ls.cov.data()[(p * C + r) * C + c] = s;
      }
    }
  stats.per_layer.push_back(std::move(ls));

  const fs::path tmp = fs::temp_directory_path() / "hetnet_lmgn_synth_stats.hntc";
  lmgn::save_stats(tmp.string(), stats);
  auto loaded = lmgn::load_stats(tmp.string());
  fs::remove(tmp);

  lmgn::NoisePatchPlan plan;
  plan.patches.push_back({1, 1, 2, 1, {C, H, W}});
  const int64_t pos = 1 * W + 2;

  RngStream rng(derive_key(21, "mc"));
  const int n_draws = 100000;
  std::vector<double> sum(3, 0.0), sumsq(9, 0.0);
  for (int t = 0; t < n_draws; ++t) {
    auto noise = lmgn::sample_noise(loaded, plan, rng);
    const Tensor& xi = noise.xi.at(1);
    double v[3];
    for (int64_t c = 0; c < C; ++c) {
      v[c] = xi.data()[c * HW + pos];
      sum[static_cast<size_t>(c)] += v[c];
    }
    for (int64_t r = 0; r < C; ++r)
      for (int64_t c = 0; c < C; ++c) sumsq[static_cast<size_t>(r * 3 + c)] += v[r] * v[c];
  }
  double mu_norm = 0.0, mu_err = 0.0;
  for (int64_t c = 0; c < C; ++c) {
    const double m = sum[static_cast<size_t>(c)] / n_draws;
    mu_err += (m - mu[c]) * (m - mu[c]);
    mu_norm += mu[c] * mu[c];
  }
  CHECK(std::sqrt(mu_err) < 0.02 * std::max(1.0, std::sqrt(mu_norm)));

  // Empirical second moments against Sigma + eps I.
  double fro_err = 0.0, fro_ref = 0.0;
  for (int64_t r = 0; r < C; ++r)
    for (int64_t c = 0; c < C; ++c) {
      const double mr = sum[static_cast<size_t>(r)] / n_draws;
      const double mc = sum[static_cast<size_t>(c)] / n_draws;
      const double emp = sumsq[static_cast<size_t>(r * 3 + c)] / n_draws - mr * mc;
      double want = 0.0;
      for (int64_t k = 0; k < C; ++k) want += A[r * 3 + k] * A[c * 3 + k];
      if (r == c) want += stats.epsilon;
      fro_err += (emp - want) * (emp - want);
      fro_ref += want * want;
    }
  CHECK(std::sqrt(fro_err) < 0.05 * std::sqrt(fro_ref));

  SUBCASE("near-zero regularizer collapses draws onto the mean") {
    lmgn::GaussianFieldStats tight = stats;
    tight.epsilon = 1e-12;
    for (auto& l : tight.per_layer) l.cov = Tensor({H, W, C, C});
    const fs::path tp = fs::temp_directory_path() / "hetnet_lmgn_tight.hntc";
    lmgn::save_stats(tp.string(), tight);
    auto tl = lmgn::load_stats(tp.string());
    fs::remove(tp);
    RngStream r2(derive_key(22, "tight"));
    auto noise = lmgn::sample_noise(tl, plan, r2);
    for (int64_t c = 0; c < C; ++c)
      CHECK(std::abs(noise.xi.at(1).data()[c * HW + pos] - mu[c]) < 1e-5);
  }
}

TEST_CASE("noise is exactly zero outside the planned patch") {
  CorpusFixture fx;
  data::DatasetIndex few = fx.train;
  few.entries.resize(8);
  auto stats = lmgn::fit_stats(fx.enc, few, fx.cfg);
  RngStream rng(derive_key(31, "locality"));
  int64_t outside_violations = 0, patches_with_signal = 0, patches_total = 0;
  for (int t = 0; t < 100; ++t) {
    auto plan = lmgn::make_plan(stats.dims(), fx.cfg.patch_frac_lo, fx.cfg.patch_frac_hi, rng);
    auto noise = lmgn::sample_noise(stats, plan, rng);
    for (const auto& p : plan.patches) {
      const Tensor& xi = noise.xi.at(p.layer);
      const int64_t C = p.dims.c, H = p.dims.h, W = p.dims.w;
      bool inside_nonzero = false;
      for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < H; ++i)
          for (int64_t j = 0; j < W; ++j) {
            const bool in = i >= p.top && i < p.top + p.side && j >= p.left &&
                            j < p.left + p.side;
            const double v = xi.data()[(c * H + i) * W + j];
            if (!in && v != 0.0) ++outside_violations;
            if (in && v != 0.0) inside_nonzero = true;
          }
      ++patches_total;
      if (inside_nonzero) ++patches_with_signal;
    }
  }
  CHECK(outside_violations == 0);
  CHECK(patches_with_signal == patches_total);
}

TEST_CASE("injection modes add and cancel as specified") {
  const int64_t C = 2, H = 4, W = 4, HW = H * W;
  std::map<int, Tensor> f;
  RngStream rng(derive_key(41, "inject"));
  Tensor base({C, H, W});
  for (int64_t n = 0; n < base.numel(); ++n) base.data()[n] = rng.normal();
  f.emplace(1, base);

  lmgn::NoisePyramid zero;
  zero.xi.emplace(1, Tensor({C, H, W}));
  zero.patch_mean.emplace(1, Tensor({C, H, W}));
  auto same = lmgn::inject(f, zero, NoiseMode::kAddXi);
  CHECK(std::memcmp(same.at(1).data(), base.data(),
                    static_cast<size_t>(base.numel()) * sizeof(double)) == 0);

  lmgn::NoisePyramid patch;
  patch.xi.emplace(1, Tensor({C, H, W}));
  patch.patch_mean.emplace(1, Tensor({C, H, W}));
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 1; i <= 2; ++i)
      for (int64_t j = 1; j <= 2; ++j) patch.xi.at(1).data()[c * HW + i * W + j] = 1.0 + c;
  auto shifted = lmgn::inject(f, patch, NoiseMode::kAddXi);
  int64_t changed = 0;
  for (int64_t n = 0; n < base.numel(); ++n)
    if (shifted.at(1).data()[n] != base.data()[n]) ++changed;
  CHECK(changed == C * 2 * 2);

  // Centered mode with xi equal to the patch mean is an identity.
  lmgn::NoisePyramid mean_only = patch;
  mean_only.patch_mean.at(1) = patch.xi.at(1);
  auto centered = lmgn::inject(f, mean_only, NoiseMode::kAddCentered);
  for (int64_t n = 0; n < base.numel(); ++n)
    CHECK(centered.at(1).data()[n] == doctest::Approx(base.data()[n]).epsilon(1e-12));

  lmgn::NoisePyramid bad;
  bad.xi.emplace(1, Tensor({C, H, 3}));
  bad.patch_mean.emplace(1, Tensor({C, H, 3}));
  CHECK_THROWS_WITH_AS(lmgn::inject(f, bad, NoiseMode::kAddXi), doctest::Contains("shape"),
                       Error);
  lmgn::NoisePyramid orphan;
  orphan.xi.emplace(9, Tensor({C, H, W}));
  orphan.patch_mean.emplace(9, Tensor({C, H, W}));
  CHECK_THROWS_WITH_AS(lmgn::inject(f, orphan, NoiseMode::kAddXi),
                       doctest::Contains("no feature layer"), Error);

  std::map<int, Tensor> multi = f;
  multi.emplace(2, Tensor({C, H, W}));
  auto partial = lmgn::inject(multi, patch, NoiseMode::kAddXi);
  CHECK(partial.count(2) == 1);
  for (int64_t n = 0; n < partial.at(2).numel(); ++n) CHECK(partial.at(2).data()[n] == 0.0);
}

TEST_CASE("standard normal noise is local, scaled, and reproducible") {
  const auto dims = toy_dims();
  RngStream prng(derive_key(51, "plan"));
  auto plan = lmgn::make_plan(dims, 0.25, 0.5, prng);

  RngStream a(derive_key(52, "draw"));
  RngStream b(derive_key(52, "draw"));
  auto na = lmgn::standard_normal_noise(plan, a, 0.7);
  auto nb = lmgn::standard_normal_noise(plan, b, 0.7);
  for (const auto& p : plan.patches)
    CHECK(std::memcmp(na.xi.at(p.layer).data(), nb.xi.at(p.layer).data(),
                      static_cast<size_t>(na.xi.at(p.layer).numel()) * sizeof(double)) == 0);

  RngStream c(derive_key(53, "zero"));
  auto nz = lmgn::standard_normal_noise(plan, c, 0.0);
  for (const auto& p : plan.patches)
    for (int64_t n = 0; n < nz.xi.at(p.layer).numel(); ++n)
      CHECK(nz.xi.at(p.layer).data()[n] == 0.0);

  // Monte-Carlo std over 1e5 in-patch draws.
  std::map<int, lmgn::LayerDims> one{{1, {4, 8, 8}}};
  RngStream pr(derive_key(54, "mcplan"));
  auto mplan = lmgn::make_plan(one, 0.5, 0.5, pr);
  RngStream dr(derive_key(55, "mcdraw"));
  double sum = 0.0, sumsq = 0.0;
  int64_t n_vals = 0;
  const auto& mp = mplan.patches[0];
  while (n_vals < 100000) {
    auto noise = lmgn::standard_normal_noise(mplan, dr, 0.7);
    const Tensor& xi = noise.xi.at(1);
    for (int64_t ch = 0; ch < 4; ++ch)
      for (int64_t i = mp.top; i < mp.top + mp.side; ++i)
        for (int64_t j = mp.left; j < mp.left + mp.side; ++j) {
          const double v = xi.data()[(ch * 8 + i) * 8 + j];
          sum += v;
          sumsq += v * v;
          ++n_vals;
        }
  }
  const double m = sum / static_cast<double>(n_vals);
  const double sd = std::sqrt(sumsq / static_cast<double>(n_vals) - m * m);
  CHECK(std::abs(sd - 0.7) < 0.02 * 0.7);
}

TEST_CASE("stats files round-trip and reject tampering") {
  CorpusFixture fx;
  data::DatasetIndex few = fx.train;
  few.entries.resize(4);
  auto stats = lmgn::fit_stats(fx.enc, few, fx.cfg);
  const fs::path p = fx.root / "stats.hntc";
  lmgn::save_stats(p.string(), stats);
  auto loaded = lmgn::load_stats(p.string());
  CHECK(loaded.backbone == stats.backbone);
  CHECK(loaded.sample_count == stats.sample_count);
  CHECK(loaded.epsilon == stats.epsilon);
  CHECK(loaded.layers == stats.layers);
  for (int k : stats.layers) {
    const auto &a = stats.layer(k), &b = loaded.layer(k);
    CHECK(std::memcmp(a.mean.data(), b.mean.data(),
                      static_cast<size_t>(a.mean.numel()) * sizeof(double)) == 0);
    CHECK(std::memcmp(a.cov.data(), b.cov.data(),
                      static_cast<size_t>(a.cov.numel()) * sizeof(double)) == 0);
    CHECK(std::memcmp(a.chol.data(), b.chol.data(),
                      static_cast<size_t>(a.chol.numel()) * sizeof(double)) == 0);
  }

  io::Container c = io::load_container(p.string());
  c.arrays[0].second.data()[0] += 1.0;
  const fs::path tampered = fx.root / "tampered.hntc";
  io::save_container(tampered.string(), c);
  CHECK_THROWS_WITH_AS(lmgn::load_stats(tampered.string()), doctest::Contains("checksum"), Error);

  io::Container other;
  other.meta["kind"] = "weights";
  other.add("x", Tensor({1}));
  const fs::path wrong = fx.root / "wrong.hntc";
  io::save_container(wrong.string(), other);
  CHECK_THROWS_WITH_AS(lmgn::load_stats(wrong.string()),
                       doctest::Contains("not a noise statistics file"), Error);
}
