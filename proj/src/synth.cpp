#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hetnet/common.hpp"
#include "hetnet/dataset.hpp"
#include "hetnet/image.hpp"
#include "hetnet/rng.hpp"
#include "hetnet/tensor.hpp"

namespace hetnet::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double uni(RngStream& r, double lo, double hi) { return lo + (hi - lo) * r.uniform(); }

// One octave of value noise: a random lattice bilinearly interpolated at
// pixel centers.
void add_value_noise(Tensor& gray, int64_t cells, double amp, RngStream& rng) {
  const int64_t S = gray.dim(0);
  std::vector<double> lattice(static_cast<size_t>((cells + 1) * (cells + 1)));
  for (auto& v : lattice) v = rng.uniform();
  for (int64_t y = 0; y < S; ++y) {
    const double v = (y + 0.5) / static_cast<double>(S) * cells;
    const int64_t i0 = std::min<int64_t>(cells - 1, static_cast<int64_t>(v));
    const double fy = v - i0;
    for (int64_t x = 0; x < S; ++x) {
      const double u = (x + 0.5) / static_cast<double>(S) * cells;
      const int64_t j0 = std::min<int64_t>(cells - 1, static_cast<int64_t>(u));
      const double fx = u - j0;
      const double a = lattice[static_cast<size_t>(i0 * (cells + 1) + j0)];
      const double b = lattice[static_cast<size_t>(i0 * (cells + 1) + j0 + 1)];
      const double c = lattice[static_cast<size_t>((i0 + 1) * (cells + 1) + j0)];
      const double d = lattice[static_cast<size_t>((i0 + 1) * (cells + 1) + j0 + 1)];
      gray.at(y, x) += amp * ((a + (b - a) * fx) * (1.0 - fy) + (c + (d - c) * fx) * fy);
    }
  }
}

void box_blur_x(Tensor& gray, int64_t radius) {
  const int64_t S = gray.dim(0);
  std::vector<double> row(static_cast<size_t>(S));
  for (int64_t y = 0; y < S; ++y) {
    for (int64_t x = 0; x < S; ++x) {
      double acc = 0.0;
      int64_t cnt = 0;
      for (int64_t dx = -radius; dx <= radius; ++dx) {
        const int64_t xx = x + dx;
        if (xx < 0 || xx >= S) continue;
        acc += gray.at(y, xx);
        ++cnt;
      }
      row[static_cast<size_t>(x)] = acc / cnt;
    }
    for (int64_t x = 0; x < S; ++x) gray.at(y, x) = row[static_cast<size_t>(x)];
  }
}

Tensor texture_base(int64_t S, const std::string& kind, RngStream& rng) {
  Tensor gray({S, S});
  add_value_noise(gray, 4, 1.0, rng);
  add_value_noise(gray, 8, 0.5, rng);
  add_value_noise(gray, 16, 0.25, rng);
  for (int64_t i = 0; i < gray.numel(); ++i)
    gray.data()[i] = gray.data()[i] / 1.75 * 0.3 + 0.35;

  if (kind == "cast") {
    for (int64_t i = 0; i < gray.numel(); ++i) {
      gray.data()[i] += uni(rng, -0.03, 0.03);
      if (rng.uniform() > 0.995) gray.data()[i] += 0.12;
    }
  } else {  // brushed
    box_blur_x(gray, std::max<int64_t>(2, S / 16));
    for (int64_t y = 0; y < S; ++y) {
      const double rowshift = uni(rng, -0.04, 0.04);
      for (int64_t x = 0; x < S; ++x) gray.at(y, x) += rowshift + uni(rng, -0.01, 0.01);
    }
  }
  return gray;
}

// Geometry predicates shared by rendering and the recorded parameters.
// Pixel (y,x) is probed at continuous point (x+0.5, y+0.5).

double seg_dist(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

struct ScratchGeom {
  std::vector<std::array<double, 2>> pts;
  double width = 0.0, delta = 0.0;
};

ScratchGeom draw_scratch(int64_t S, RngStream& rng) {
  ScratchGeom g;
  const int nseg = static_cast<int>(rng.uniform_int(3, 6));
  double x = uni(rng, 0.15 * S, 0.85 * S);
  double y = uni(rng, 0.15 * S, 0.85 * S);
  double th = uni(rng, 0.0, 2.0 * M_PI);
  g.pts.push_back({x, y});
  for (int i = 0; i < nseg; ++i) {
    const double len = uni(rng, 0.06, 0.14) * S;
    th += uni(rng, -0.5, 0.5);
    x = std::clamp(x + len * std::cos(th), 2.0, S - 2.0);
    y = std::clamp(y + len * std::sin(th), 2.0, S - 2.0);
    g.pts.push_back({x, y});
  }
  g.width = uni(rng, 1.5, 3.0) * std::max(1.0, S / 64.0);
  g.delta = -uni(rng, 0.2, 0.4);
  return g;
}

int64_t raster_scratch(const ScratchGeom& g, int64_t S, Tensor& gray, Tensor& mask) {
  int64_t area = 0;
  for (int64_t yy = 0; yy < S; ++yy)
    for (int64_t xx = 0; xx < S; ++xx) {
      const double px = xx + 0.5, py = yy + 0.5;
      double d = 1e30;
      for (size_t i = 0; i + 1 < g.pts.size(); ++i)
        d = std::min(d, seg_dist(px, py, g.pts[i][0], g.pts[i][1], g.pts[i + 1][0],
                                 g.pts[i + 1][1]));
      if (d <= g.width * 0.5) {
        mask.at(yy, xx) = 1.0;
        ++area;
        gray.at(yy, xx) += g.delta * (1.0 - d / (g.width * 0.5 + 1e-9) * 0.5);
      }
    }
  return area;
}

struct BlobGeom {
  double cx = 0, cy = 0, rx = 0, ry = 0, theta = 0, delta = 0;
};

BlobGeom draw_blob(int64_t S, RngStream& rng) {
  BlobGeom g;
  const double frac = uni(rng, 0.008, 0.04);
  const double aspect = std::exp(uni(rng, -0.4, 0.4));
  const double r = std::sqrt(frac * S * S / M_PI);
  g.rx = r * aspect;
  g.ry = r / aspect;
  const double margin = std::max(g.rx, g.ry) + 2.0;
  g.cx = uni(rng, margin, S - margin);
  g.cy = uni(rng, margin, S - margin);
  g.theta = uni(rng, 0.0, M_PI);
  g.delta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * uni(rng, 0.2, 0.4);
  return g;
}

int64_t raster_blob(const BlobGeom& g, int64_t S, Tensor& gray, Tensor& mask) {
  int64_t area = 0;
  const double c = std::cos(g.theta), s = std::sin(g.theta);
  for (int64_t yy = 0; yy < S; ++yy)
    for (int64_t xx = 0; xx < S; ++xx) {
      const double dx = xx + 0.5 - g.cx, dy = yy + 0.5 - g.cy;
      const double u = (dx * c + dy * s) / g.rx;
      const double v = (-dx * s + dy * c) / g.ry;
      const double rho2 = u * u + v * v;
      if (rho2 <= 1.0) {
        mask.at(yy, xx) = 1.0;
        ++area;
        gray.at(yy, xx) += g.delta * (1.0 - rho2);
      }
    }
  return area;
}

struct DentGeom {
  double cx = 0, cy = 0, radius = 0, strength = 0;
};

DentGeom draw_dent(int64_t S, RngStream& rng) {
  DentGeom g;
  const double frac = uni(rng, 0.008, 0.04);
  g.radius = std::sqrt(frac * S * S / M_PI);
  const double margin = g.radius + 2.0;
  g.cx = uni(rng, margin, S - margin);
  g.cy = uni(rng, margin, S - margin);
  g.strength = uni(rng, 0.3, 0.55);
  return g;
}

int64_t raster_dent(const DentGeom& g, int64_t S, Tensor& gray, Tensor& mask) {
  const Tensor before = gray;
  auto sample = [&](double px, double py) {
    const double fx = std::clamp(px - 0.5, 0.0, static_cast<double>(S - 1));
    const double fy = std::clamp(py - 0.5, 0.0, static_cast<double>(S - 1));
    const int64_t x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
    const int64_t x1 = std::min(x0 + 1, S - 1), y1 = std::min(y0 + 1, S - 1);
    const double ax = fx - x0, ay = fy - y0;
    const double top = before.at(y0, x0) + (before.at(y0, x1) - before.at(y0, x0)) * ax;
    const double bot = before.at(y1, x0) + (before.at(y1, x1) - before.at(y1, x0)) * ax;
    return top + (bot - top) * ay;
  };
  int64_t area = 0;
  for (int64_t yy = 0; yy < S; ++yy)
    for (int64_t xx = 0; xx < S; ++xx) {
      const double px = xx + 0.5, py = yy + 0.5;
      const double dx = px - g.cx, dy = py - g.cy;
      const double rho = std::sqrt(dx * dx + dy * dy) / g.radius;
      if (rho <= 1.0) {
        mask.at(yy, xx) = 1.0;
        ++area;
        const double bowl = 1.0 - rho * rho;
        const double pull = 1.0 - g.strength * bowl;
        gray.at(yy, xx) =
            sample(g.cx + dx * pull, g.cy + dy * pull) * (1.0 - 0.3 * g.strength * bowl * bowl);
      }
    }
  return area;
}

json render_defect(const std::string& type, int64_t S, Tensor& gray, Tensor& mask,
                   RngStream& rng) {
  const int64_t lo = static_cast<int64_t>(0.005 * S * S);
  const int64_t hi = static_cast<int64_t>(0.05 * S * S);
  for (int attempt = 0; attempt < 30; ++attempt) {
    Tensor g2 = gray;
    Tensor m2({S, S});
    json rec;
    int64_t area = 0;
    if (type == "scratch") {
      const ScratchGeom g = draw_scratch(S, rng);
      area = raster_scratch(g, S, g2, m2);
      rec = {{"type", "scratch"}, {"width", g.width}, {"delta", g.delta}};
      for (const auto& p : g.pts) rec["points"].push_back({p[0], p[1]});
    } else if (type == "blob") {
      const BlobGeom g = draw_blob(S, rng);
      area = raster_blob(g, S, g2, m2);
      rec = {{"type", "blob"},   {"cx", g.cx},         {"cy", g.cy},      {"rx", g.rx},
             {"ry", g.ry},       {"theta", g.theta},   {"delta", g.delta}};
    } else if (type == "dent") {
      const DentGeom g = draw_dent(S, rng);
      area = raster_dent(g, S, g2, m2);
      rec = {{"type", "dent"},
             {"cx", g.cx},
             {"cy", g.cy},
             {"radius", g.radius},
             {"strength", g.strength}};
    } else {
      fail("synth: unknown defect type '" + type + "'");
    }
    if (area >= std::max<int64_t>(1, lo) && area <= hi) {
      gray = std::move(g2);
      mask = std::move(m2);
      rec["mask_area"] = area;
      return rec;
    }
  }
  fail("synth: could not plan a '" + type + "' defect inside the area band at size " +
       std::to_string(S));
}

Tensor finish_image(const Tensor& gray, double illum, double res_level) {
  const int64_t S = gray.dim(0);
  Tensor work = gray;
  if (res_level < 1.0) {
    const int64_t small = std::max<int64_t>(8, static_cast<int64_t>(std::lround(S * res_level)));
    work = img::resize_bilinear(img::resize_bilinear(work, small, small), S, S);
  }
  Tensor rgb({3, S, S});
  // Slight warm tint keeps the channels from being perfectly identical.
  const double tint[3] = {1.0, 0.985, 0.96};
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < S * S; ++i)
      rgb.data()[c * S * S + i] = std::clamp(work.data()[i] * illum * tint[c], 0.0, 1.0);
  return rgb;
}

std::string zfill3(int64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%03lld", static_cast<long long>(v));
  return buf;
}

}  // namespace

void synth_corpus(const std::string& root, const std::string& category, const SynthSpec& spec,
                  int64_t image_size, int64_t seed) {
  HT_CHECK(spec.n_train >= 1 && spec.n_test_good >= 1 && spec.n_test_defect >= 1,
           "synth: corpus counts must be >= 1");
  HT_CHECK(!spec.defect_types.empty(), "synth: at least one defect type required");
  const fs::path base = fs::path(root) / category;
  if (fs::exists(base))
    HT_CHECK(fs::is_empty(base), "synth: output directory " + base.string() + " is not empty");
  fs::create_directories(base / "train" / "good");
  fs::create_directories(base / "test" / "good");

  const int64_t S = image_size;
  json geometry;
  geometry["seed"] = seed;
  geometry["image_size"] = S;
  geometry["texture"] = spec.texture;
  geometry["images"] = json::array();

  const auto& il = spec.illumination_levels;
  const auto& rl = spec.resolution_levels;
  auto levels_for = [&](int64_t idx) {
    const double illum = il[static_cast<size_t>(idx % static_cast<int64_t>(il.size()))];
    const double res =
        rl[static_cast<size_t>((idx / static_cast<int64_t>(il.size())) %
                               static_cast<int64_t>(rl.size()))];
    return std::pair<double, double>(illum, res);
  };

  auto emit = [&](const std::string& split_tag, const fs::path& img_path,
                  const fs::path& mask_path, const std::string& defect_type, int64_t idx) {
    RngStream rng(derive_key(static_cast<uint64_t>(seed),
                             {"synth", split_tag, std::to_string(idx)}));
    Tensor gray = texture_base(S, spec.texture, rng);
    json rec;
    rec["path"] = fs::relative(img_path, base).string();
    const auto [illum, res] = levels_for(idx);
    rec["illumination"] = illum;
    rec["resolution"] = res;
    if (!defect_type.empty()) {
      Tensor mask({S, S});
      rec["defect"] = render_defect(defect_type, S, gray, mask, rng);
      fs::create_directories(mask_path.parent_path());
      img::save_image_rgb(mask_path.string(), mask.reshaped({1, S, S}));
      rec["mask"] = fs::relative(mask_path, base).string();
    }
    fs::create_directories(img_path.parent_path());
    img::save_image_rgb(img_path.string(), finish_image(gray, illum, res));
    geometry["images"].push_back(rec);
  };

  for (int64_t i = 0; i < spec.n_train; ++i)
    emit("train_good", base / "train" / "good" / (zfill3(i) + ".png"), {}, "", i);
  for (int64_t i = 0; i < spec.n_test_good; ++i)
    emit("test_good", base / "test" / "good" / (zfill3(i) + ".png"), {}, "", i);

  std::vector<int64_t> per_type_count(spec.defect_types.size(), 0);
  for (int64_t i = 0; i < spec.n_test_defect; ++i) {
    const size_t ti = static_cast<size_t>(i) % spec.defect_types.size();
    const std::string& type = spec.defect_types[ti];
    const std::string stem = zfill3(per_type_count[ti]++);
    emit("test_defect", base / "test" / type / (stem + ".png"),
         base / "ground_truth" / type / (stem + "_mask.png"), type, i);
  }

  std::ofstream g(base / "geometry.json");
  HT_CHECK(g.good(), "synth: cannot write geometry.json under " + base.string());
  g << geometry.dump(2) << "\n";
}

}  // namespace hetnet::data
