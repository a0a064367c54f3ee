#include "hetnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "hetnet/common.hpp"

namespace hetnet::img {

namespace {

void split_planes(const Tensor& t, int64_t& planes, int64_t& h, int64_t& w) {
  HT_CHECK(t.ndim() >= 2, "resize: tensor needs at least 2 dims, got " + shape_str(t.shape()));
  h = t.dim(t.ndim() - 2);
  w = t.dim(t.ndim() - 1);
  planes = t.numel() / (h * w);
}

std::vector<int64_t> with_spatial(const Tensor& t, int64_t oh, int64_t ow) {
  auto s = t.shape();
  s[s.size() - 2] = oh;
  s[s.size() - 1] = ow;
  return s;
}

// Symmetric half-sample reflection: -1 -> 0, n -> n-1.
int64_t reflect(int64_t p, int64_t n) {
  while (p < 0 || p >= n) {
    if (p < 0) p = -p - 1;
    if (p >= n) p = 2 * n - p - 1;
  }
  return p;
}

cv::Mat read_or_fail(const std::string& path, int flags, const char* what) {
  cv::Mat m = cv::imread(path, flags);
  HT_CHECK(!m.empty(), std::string("failed to read ") + what + ": " + path);
  return m;
}

}  // namespace

Tensor load_image_rgb(const std::string& path) {
  cv::Mat bgr = read_or_fail(path, cv::IMREAD_COLOR, "image");
  const int64_t h = bgr.rows, w = bgr.cols;
  Tensor out({3, h, w});
  double* o = out.data();
  for (int64_t y = 0; y < h; ++y) {
    const unsigned char* row = bgr.ptr<unsigned char>(static_cast<int>(y));
    for (int64_t x = 0; x < w; ++x) {
      o[0 * h * w + y * w + x] = row[3 * x + 2] / 255.0;
      o[1 * h * w + y * w + x] = row[3 * x + 1] / 255.0;
      o[2 * h * w + y * w + x] = row[3 * x + 0] / 255.0;
    }
  }
  return out;
}

Tensor load_mask(const std::string& path) {
  cv::Mat g = read_or_fail(path, cv::IMREAD_GRAYSCALE, "mask");
  const int64_t h = g.rows, w = g.cols;
  Tensor out({1, h, w});
  double* o = out.data();
  for (int64_t y = 0; y < h; ++y) {
    const unsigned char* row = g.ptr<unsigned char>(static_cast<int>(y));
    for (int64_t x = 0; x < w; ++x) o[y * w + x] = row[x] >= 128 ? 1.0 : 0.0;
  }
  return out;
}

void save_image_rgb(const std::string& path, const Tensor& chw) {
  HT_CHECK(chw.ndim() == 3 && (chw.dim(0) == 3 || chw.dim(0) == 1),
           "save_image_rgb: expected (3,H,W) or (1,H,W), got " + shape_str(chw.shape()));
  const int64_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  cv::Mat bgr(static_cast<int>(h), static_cast<int>(w), CV_8UC3);
  const double* p = chw.data();
  auto q = [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (int64_t y = 0; y < h; ++y) {
    unsigned char* row = bgr.ptr<unsigned char>(static_cast<int>(y));
    for (int64_t x = 0; x < w; ++x) {
      const double r = p[0 * h * w + y * w + x];
      const double g = c == 3 ? p[1 * h * w + y * w + x] : r;
      const double b = c == 3 ? p[2 * h * w + y * w + x] : r;
      row[3 * x + 0] = q(b);
      row[3 * x + 1] = q(g);
      row[3 * x + 2] = q(r);
    }
  }
  HT_CHECK(cv::imwrite(path, bgr), "failed to write image: " + path);
}

Tensor resize_bilinear(const Tensor& t, int64_t out_h, int64_t out_w) {
  HT_CHECK(out_h > 0 && out_w > 0, "resize_bilinear: target size must be positive");
  int64_t planes, h, w;
  split_planes(t, planes, h, w);
  if (h == out_h && w == out_w) return t;
  Tensor out(with_spatial(t, out_h, out_w));

  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  std::vector<int64_t> x0(out_w), x1(out_w);
  std::vector<double> xf(out_w);
  for (int64_t x = 0; x < out_w; ++x) {
    const double src = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
    x0[x] = static_cast<int64_t>(src);
    x1[x] = std::min(x0[x] + 1, w - 1);
    xf[x] = src - static_cast<double>(x0[x]);
  }
  for (int64_t p = 0; p < planes; ++p) {
    const double* in = t.data() + p * h * w;
    double* o = out.data() + p * out_h * out_w;
    for (int64_t y = 0; y < out_h; ++y) {
      const double src = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const int64_t y0 = static_cast<int64_t>(src);
      const int64_t y1 = std::min(y0 + 1, h - 1);
      const double yf = src - static_cast<double>(y0);
      const double* r0 = in + y0 * w;
      const double* r1 = in + y1 * w;
      for (int64_t x = 0; x < out_w; ++x) {
        const double top = r0[x0[x]] + (r0[x1[x]] - r0[x0[x]]) * xf[x];
        const double bot = r1[x0[x]] + (r1[x1[x]] - r1[x0[x]]) * xf[x];
        o[y * out_w + x] = top + (bot - top) * yf;
      }
    }
  }
  return out;
}

Tensor resize_nearest(const Tensor& t, int64_t out_h, int64_t out_w) {
  HT_CHECK(out_h > 0 && out_w > 0, "resize_nearest: target size must be positive");
  int64_t planes, h, w;
  split_planes(t, planes, h, w);
  if (h == out_h && w == out_w) return t;
  Tensor out(with_spatial(t, out_h, out_w));

  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  std::vector<int64_t> xi(out_w);
  for (int64_t x = 0; x < out_w; ++x)
    xi[x] = std::min<int64_t>(w - 1, static_cast<int64_t>((x + 0.5) * sx));
  for (int64_t p = 0; p < planes; ++p) {
    const double* in = t.data() + p * h * w;
    double* o = out.data() + p * out_h * out_w;
    for (int64_t y = 0; y < out_h; ++y) {
      const int64_t yi = std::min<int64_t>(h - 1, static_cast<int64_t>((y + 0.5) * sy));
      const double* r = in + yi * w;
      for (int64_t x = 0; x < out_w; ++x) o[y * out_w + x] = r[xi[x]];
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& t, double sigma) {
  if (sigma <= 0.0) return t;
  int64_t planes, h, w;
  split_planes(t, planes, h, w);

  const int64_t radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double ksum = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    ksum += k[i + radius];
  }
  for (double& v : k) v /= ksum;

  Tensor out(t.shape());
  std::vector<double> tmp(static_cast<size_t>(h * w));
  for (int64_t p = 0; p < planes; ++p) {
    const double* in = t.data() + p * h * w;
    double* o = out.data() + p * h * w;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i)
          acc += k[i + radius] * in[y * w + reflect(x + i, w)];
        tmp[y * w + x] = acc;
      }
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i)
          acc += k[i + radius] * tmp[reflect(y + i, h) * w + x];
        o[y * w + x] = acc;
      }
  }
  return out;
}

std::array<double, 3> turbo_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  // Polynomial fit of the Turbo colormap.
  const double r = 0.13572138 + t * (4.61539260 + t * (-42.66032258 + t * (132.13108234 + t * (-152.94239396 + t * 59.28637943))));
  const double g = 0.09140261 + t * (2.19418839 + t * (4.84296658 + t * (-14.18503333 + t * (4.27729857 + t * 2.82956604))));
  const double b = 0.10667330 + t * (12.64194608 + t * (-60.58204836 + t * (110.36276771 + t * (-89.90310912 + t * 27.34824973))));
  return {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
}

void export_heatmap(const std::string& path, const Tensor& map_hw,
                    const Tensor& image_chw) {
  HT_CHECK(map_hw.ndim() == 2, "export_heatmap: map must be (H,W), got " + shape_str(map_hw.shape()));
  HT_CHECK(image_chw.ndim() == 3 && image_chw.dim(0) == 3,
           "export_heatmap: image must be (3,H,W), got " + shape_str(image_chw.shape()));
  const int64_t h = map_hw.dim(0), w = map_hw.dim(1);
  Tensor base = resize_bilinear(image_chw, h, w);

  double lo = map_hw.data()[0], hi = map_hw.data()[0];
  for (int64_t i = 1; i < map_hw.numel(); ++i) {
    lo = std::min(lo, map_hw.data()[i]);
    hi = std::max(hi, map_hw.data()[i]);
  }
  const double span = hi - lo;

  Tensor blend({3, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double t = span > 0.0 ? (map_hw.at(y, x) - lo) / span : 0.0;
      const auto rgb = turbo_color(t);
      for (int64_t c = 0; c < 3; ++c)
        blend.at(c, y, x) = 0.5 * rgb[static_cast<size_t>(c)] + 0.5 * base.at(c, y, x);
    }
  save_image_rgb(path, blend);
}

}  // namespace hetnet::img
