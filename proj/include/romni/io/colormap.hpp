#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "romni/core/error.hpp"
#include "romni/core/tensor.hpp"

namespace romni {

namespace detail {

// compact viridis approximation, linearly interpolated
inline void viridis(double t, uint8_t rgb[3]) {
  static const double anchors[9][3] = {
      {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
      {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
      {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.993, 0.906, 0.144}};
  t = std::clamp(t, 0.0, 1.0) * 8.0;
  int i = std::min(static_cast<int>(t), 7);
  double a = t - i;
  for (int c = 0; c < 3; ++c) {
    double v = anchors[i][c] * (1 - a) + anchors[i + 1][c] * a;
    rgb[c] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
}

// error ramp: dark blue (0) through yellow to red (saturated)
inline void error_ramp(double t, uint8_t rgb[3]) {
  t = std::clamp(t, 0.0, 1.0);
  double r, g, b;
  if (t < 0.5) {
    double a = t * 2;  // blue -> yellow
    r = a;
    g = a;
    b = 0.5 * (1 - a);
  } else {
    double a = (t - 0.5) * 2;  // yellow -> red
    r = 1.0;
    g = 1.0 - a;
    b = 0.0;
  }
  rgb[0] = static_cast<uint8_t>(std::lround(r * 255));
  rgb[1] = static_cast<uint8_t>(std::lround(g * 255));
  rgb[2] = static_cast<uint8_t>(std::lround(b * 255));
}

}  // namespace detail

/// |pred - gt| colorized on a fixed scale that saturates at 5 index units
/// (the band of the >5 metric); invalid pixels are black.
inline Tensor<uint8_t> render_error_map(const Tensor<float>& pred, const Tensor<float>& gt,
                                        const Tensor<uint8_t>& mask, double saturate = 5.0) {
  check_same_shape(pred, gt, "render_error_map");
  if (mask.numel() != pred.numel()) throw InputError("render_error_map: mask size mismatch");
  Tensor<uint8_t> img({pred.dim(0), pred.dim(1), 3}, uint8_t(0));
  for (int64_t i = 0; i < pred.numel(); ++i) {
    if (!mask[i]) continue;
    double e = std::abs(static_cast<double>(pred[i]) - gt[i]);
    detail::error_ramp(e / saturate, img.data() + i * 3);
  }
  return img;
}

/// Inverse-depth index panorama to color (near = bright), scaled by the
/// index range [0, n_max]; invalid pixels black.
inline Tensor<uint8_t> render_index_map(const Tensor<float>& idx, const Tensor<uint8_t>& mask,
                                        double n_max) {
  if (idx.ndim() != 2) throw InputError("render_index_map: expected (H, W)");
  Tensor<uint8_t> img({idx.dim(0), idx.dim(1), 3}, uint8_t(0));
  for (int64_t i = 0; i < idx.numel(); ++i) {
    if (!mask[i]) continue;
    detail::viridis(idx[i] / n_max, img.data() + i * 3);
  }
  return img;
}

}  // namespace romni
