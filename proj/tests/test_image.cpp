#include "hetnet/image.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "doctest.h"
#include "hetnet/common.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/tensor.hpp"

using namespace hetnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("img_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string file(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("bilinear upsample 2x2 to 4x4 matches hand-computed half-pixel weights") {
  // Source [[1,1],[3,3]]: output rows sample source y at -0.25, 0.25, 0.75,
  // 1.25 (clamped), giving 1, 1.5, 2.5, 3. Columns are constant.
  Tensor src({1, 2, 2}, {1, 1, 3, 3});
  Tensor out = img::resize_bilinear(src, 4, 4);
  const double expect[4] = {1.0, 1.5, 2.5, 3.0};
  for (int64_t y = 0; y < 4; ++y)
    for (int64_t x = 0; x < 4; ++x) CHECK(out.at(int64_t{0}, y, x) == doctest::Approx(expect[y]).epsilon(1e-15));
}

TEST_CASE("bilinear resize preserves constants and identity sizes") {
  Tensor c = Tensor::full({2, 5, 7}, 0.3125);
  Tensor up = img::resize_bilinear(c, 13, 4);
  for (int64_t i = 0; i < up.numel(); ++i) CHECK(up.data()[i] == doctest::Approx(0.3125).epsilon(1e-15));

  RngStream rng(derive_key(5, {"img"}));
  Tensor r = randn({3, 6, 6}, rng);
  Tensor same = img::resize_bilinear(r, 6, 6);
  CHECK(max_abs_diff(r, same) == 0.0);
}

TEST_CASE("bilinear downsample of a half-pixel-aligned average is exact") {
  // 4x4 -> 2x2 with half-pixel centers lands exactly between 2x2 blocks,
  // so each output is the mean of its block.
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[i] = i;
  Tensor src({1, 4, 4}, v);
  Tensor out = img::resize_bilinear(src, 2, 2);
  CHECK(out.at(int64_t{0}, int64_t{0}, int64_t{0}) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
  CHECK(out.at(int64_t{0}, int64_t{0}, int64_t{1}) == doctest::Approx((2 + 3 + 6 + 7) / 4.0));
  CHECK(out.at(int64_t{0}, int64_t{1}, int64_t{0}) == doctest::Approx((8 + 9 + 12 + 13) / 4.0));
  CHECK(out.at(int64_t{0}, int64_t{1}, int64_t{1}) == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
}

TEST_CASE("nearest resize preserves binarity") {
  RngStream rng(derive_key(6, {"img"}));
  Tensor mask({1, 5, 5});
  for (int64_t i = 0; i < 25; ++i) mask.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  Tensor up = img::resize_nearest(mask, 17, 11);
  for (int64_t i = 0; i < up.numel(); ++i)
    CHECK((up.data()[i] == 0.0 || up.data()[i] == 1.0));
  Tensor down = img::resize_nearest(up, 3, 3);
  for (int64_t i = 0; i < down.numel(); ++i)
    CHECK((down.data()[i] == 0.0 || down.data()[i] == 1.0));
}

TEST_CASE("gaussian blur is mass-preserving on constants and symmetric on an impulse") {
  Tensor c = Tensor::full({1, 9, 9}, 2.5);
  Tensor bc = img::gaussian_blur(c, 1.3);
  for (int64_t i = 0; i < bc.numel(); ++i) CHECK(bc.data()[i] == doctest::Approx(2.5).epsilon(1e-12));

  Tensor imp({1, 11, 11});
  imp.at(int64_t{0}, int64_t{5}, int64_t{5}) = 1.0;
  Tensor bi = img::gaussian_blur(imp, 1.0);
  double total = 0.0;
  for (int64_t i = 0; i < bi.numel(); ++i) total += bi.data()[i];
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // Radial symmetry of the response.
  CHECK(bi.at(int64_t{0}, int64_t{5}, int64_t{7}) == doctest::Approx(bi.at(int64_t{0}, int64_t{5}, int64_t{3})));
  CHECK(bi.at(int64_t{0}, int64_t{3}, int64_t{5}) == doctest::Approx(bi.at(int64_t{0}, int64_t{7}, int64_t{5})));
  CHECK(bi.at(int64_t{0}, int64_t{5}, int64_t{5}) > bi.at(int64_t{0}, int64_t{5}, int64_t{6}));

  // Separable blur matches a direct 2D convolution with reflected borders.
  RngStream rng(derive_key(9, {"img"}));
  Tensor r = rand_uniform({1, 8, 8}, rng, 0.0, 1.0);
  const double sigma = 1.1;
  Tensor br = img::gaussian_blur(r, sigma);
  const int R = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * R + 1);
  double ks = 0.0;
  for (int i = -R; i <= R; ++i) ks += k[i + R] = std::exp(-i * i / (2.0 * sigma * sigma));
  for (double& kv : k) kv /= ks;
  auto refl = [](int p, int n) {
    while (p < 0 || p >= n) {
      if (p < 0) p = -p - 1;
      if (p >= n) p = 2 * n - p - 1;
    }
    return p;
  };
  for (int64_t y = 0; y < 8; ++y)
    for (int64_t x = 0; x < 8; ++x) {
      double acc = 0.0;
      for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx <= R; ++dx)
          acc += k[dy + R] * k[dx + R] *
                 r.at(int64_t{0}, int64_t{refl(static_cast<int>(y) + dy, 8)},
                      int64_t{refl(static_cast<int>(x) + dx, 8)});
      CHECK(br.at(int64_t{0}, y, x) == doctest::Approx(acc).epsilon(1e-12));
    }

  // Sigma zero (smoothing disabled) is the identity.
  CHECK(max_abs_diff(img::gaussian_blur(r, 0.0), r) == 0.0);
}

TEST_CASE("turbo colormap endpoints and ordering") {
  auto lo = img::turbo_color(0.1);
  auto hi = img::turbo_color(1.0);
  // Low end is blue-dominant, high end red-dominant.
  CHECK(lo[2] > lo[0]);
  CHECK(hi[0] > hi[2]);
  for (double v : lo) CHECK((v >= 0.0 && v <= 1.0));
  for (double v : hi) CHECK((v >= 0.0 && v <= 1.0));
  // Midpoint is bright (greenish).
  auto mid = img::turbo_color(0.5);
  CHECK(mid[1] > 0.6);
  // Out-of-range inputs clamp.
  CHECK(img::turbo_color(-3.0) == img::turbo_color(0.0));
  CHECK(img::turbo_color(7.0) == img::turbo_color(1.0));
}

TEST_CASE("png round-trip preserves 8-bit quantized values") {
  TempDir td;
  RngStream rng(derive_key(12, {"img"}));
  Tensor im = rand_uniform({3, 6, 9}, rng, 0.0, 1.0);
  // Snap to the 8-bit grid first so the round trip is exact.
  for (int64_t i = 0; i < im.numel(); ++i)
    im.data()[i] = std::round(im.data()[i] * 255.0) / 255.0;
  const std::string p = td.file("rt.png");
  img::save_image_rgb(p, im);
  Tensor back = img::load_image_rgb(p);
  REQUIRE(back.shape() == im.shape());
  CHECK(max_abs_diff(back, im) < 1e-12);
}

TEST_CASE("mask loader binarizes and missing files raise actionable errors") {
  TempDir td;
  Tensor m({1, 4, 4});
  m.at(int64_t{0}, int64_t{1}, int64_t{2}) = 1.0;
  m.at(int64_t{0}, int64_t{3}, int64_t{3}) = 1.0;
  const std::string p = td.file("mask.png");
  img::save_image_rgb(p, m);
  Tensor back = img::load_mask(p);
  CHECK(max_abs_diff(back, m) == 0.0);

  CHECK_THROWS_WITH_AS(img::load_image_rgb(td.file("absent.png")),
                       doctest::Contains("absent.png"), Error);
  CHECK_THROWS_WITH_AS(img::load_mask(td.file("absent.png")),
                       doctest::Contains("absent.png"), Error);
}

TEST_CASE("heatmap export writes deterministic bytes and handles constant maps") {
  TempDir td;
  RngStream rng(derive_key(13, {"img"}));
  Tensor base = rand_uniform({3, 8, 8}, rng, 0.0, 1.0);
  Tensor map({8, 8});
  for (int64_t y = 0; y < 8; ++y)
    for (int64_t x = 0; x < 8; ++x) map.at(y, x) = static_cast<double>(y + x);

  img::export_heatmap(td.file("a.png"), map, base);
  img::export_heatmap(td.file("b.png"), map, base);
  auto read_bytes = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  };
  CHECK(read_bytes(td.file("a.png")) == read_bytes(td.file("b.png")));

  // A constant map renders at the colormap floor everywhere.
  Tensor flat = Tensor::full({8, 8}, 0.7);
  img::export_heatmap(td.file("flat.png"), flat, base);
  Tensor over = img::load_image_rgb(td.file("flat.png"));
  auto floor_rgb = img::turbo_color(0.0);
  for (int64_t y = 0; y < 8; ++y)
    for (int64_t x = 0; x < 8; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        const double expect = 0.5 * floor_rgb[static_cast<size_t>(c)] + 0.5 * base.at(c, y, x);
        CHECK(over.at(c, y, x) == doctest::Approx(expect).epsilon(0.0).scale(1.0).epsilon(1e-2));
      }
}
