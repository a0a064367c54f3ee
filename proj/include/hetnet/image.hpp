#pragma once

#include <array>
#include <string>

#include "hetnet/tensor.hpp"

namespace hetnet::img {

// Images are (C,H,W) float64 tensors. Loaders scale 8-bit data to [0,1];
// savers clamp to [0,1] and quantize back. Masks are (1,H,W) with values
// exactly 0 or 1.
Tensor load_image_rgb(const std::string& path);
Tensor load_mask(const std::string& path);
void save_image_rgb(const std::string& path, const Tensor& chw);

// Both resizers treat the trailing two dims as (H,W) and every leading dim
// as an independent plane. Sampling uses half-pixel centers: the source
// coordinate of output pixel i is (i+0.5)*scale-0.5, clamped to the grid.
Tensor resize_bilinear(const Tensor& t, int64_t out_h, int64_t out_w);
Tensor resize_nearest(const Tensor& t, int64_t out_h, int64_t out_w);

// Separable Gaussian, radius ceil(3*sigma), symmetric border reflection.
// sigma <= 0 returns the input unchanged.
Tensor gaussian_blur(const Tensor& t, double sigma);

// Turbo colormap, t clamped to [0,1], returns {r,g,b} in [0,1].
std::array<double, 3> turbo_color(double t);

// Min-max normalizes map_hw, renders it through turbo_color, and writes
// a 0.5/0.5 alpha blend over the (3,H,W) base image. A constant map
// renders at the colormap floor.
void export_heatmap(const std::string& path, const Tensor& map_hw,
                    const Tensor& image_chw);

}  // namespace hetnet::img
