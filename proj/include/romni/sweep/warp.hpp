#pragma once

#include <cstdint>
#include <vector>

#include "romni/core/tape.hpp"
#include "romni/sweep/sweep.hpp"

namespace romni {

/// Warp a fisheye feature map (h_f, w_f, C) into the spherical volume
/// (h2, w2, n2, C) of one camera: bilinear sampling at the grid coordinates,
/// exact zeros where the grid is invalid. Differentiable in feat.
template <typename T>
Var warp_features(Tape<T>& tape, Var feat, const SweepGrids& grids, int cam) {
  const auto& vf = tape.val(feat);
  if (vf.ndim() != 3) throw InputError("warp_features: feature map must be (h, w, C)");
  const int64_t hf = vf.dim(0), wf = vf.dim(1), c = vf.dim(2);
  const auto& coords = grids.coords[static_cast<size_t>(cam)];
  const auto& valid = grids.valid[static_cast<size_t>(cam)];
  const int64_t cells = static_cast<int64_t>(grids.h2) * grids.w2 * grids.n2;

  // Sampling positions are constants: precompute corner indices and weights.
  struct Taps {
    std::vector<int64_t> i00, i01, i10, i11;
    std::vector<T> w00, w01, w10, w11;
    std::vector<uint8_t> ok;
  };
  Taps tp;
  tp.i00.resize(cells);
  tp.i01.resize(cells);
  tp.i10.resize(cells);
  tp.i11.resize(cells);
  tp.w00.resize(cells);
  tp.w01.resize(cells);
  tp.w10.resize(cells);
  tp.w11.resize(cells);
  tp.ok.assign(valid.data(), valid.data() + cells);
  for (int64_t i = 0; i < cells; ++i) {
    if (!tp.ok[i]) {
      tp.i00[i] = tp.i01[i] = tp.i10[i] = tp.i11[i] = 0;
      tp.w00[i] = tp.w01[i] = tp.w10[i] = tp.w11[i] = T(0);
      continue;
    }
    double px = (coords[2 * i + 0] + 1.0) * 0.5 * (wf - 1);
    double py = (coords[2 * i + 1] + 1.0) * 0.5 * (hf - 1);
    px = std::min(std::max(px, 0.0), static_cast<double>(wf - 1));
    py = std::min(std::max(py, 0.0), static_cast<double>(hf - 1));
    int64_t x0 = std::min(static_cast<int64_t>(px), wf - 2);
    int64_t y0 = std::min(static_cast<int64_t>(py), hf - 2);
    if (wf < 2) x0 = 0;
    if (hf < 2) y0 = 0;
    T ax = static_cast<T>(px - x0);
    T ay = static_cast<T>(py - y0);
    int64_t x1 = std::min(x0 + 1, wf - 1);
    int64_t y1 = std::min(y0 + 1, hf - 1);
    tp.i00[i] = (y0 * wf + x0) * c;
    tp.i01[i] = (y0 * wf + x1) * c;
    tp.i10[i] = (y1 * wf + x0) * c;
    tp.i11[i] = (y1 * wf + x1) * c;
    tp.w00[i] = (T(1) - ay) * (T(1) - ax);
    tp.w01[i] = (T(1) - ay) * ax;
    tp.w10[i] = ay * (T(1) - ax);
    tp.w11[i] = ay * ax;
  }

  Tensor<T> out({grids.h2, grids.w2, grids.n2, c}, T(0));
  const T* fp = vf.data();
  T* op = out.data();
  for (int64_t i = 0; i < cells; ++i) {
    if (!tp.ok[i]) continue;
    T* ocell = op + i * c;
    const T *p00 = fp + tp.i00[i], *p01 = fp + tp.i01[i];
    const T *p10 = fp + tp.i10[i], *p11 = fp + tp.i11[i];
    for (int64_t k = 0; k < c; ++k)
      ocell[k] = tp.w00[i] * p00[k] + tp.w01[i] * p01[k] + tp.w10[i] * p10[k] + tp.w11[i] * p11[k];
  }

  return tape.push(std::move(out), tape.needs_grad(feat),
                   [feat, tp = std::move(tp), cells, c](Tape<T>& t, int self) {
                     if (!t.needs_grad(feat)) return;
                     const auto& g = t.grad(Var{self});
                     auto& gf = t.grad(feat);
                     const T* gp = g.data();
                     T* gfp = gf.data();
                     for (int64_t i = 0; i < cells; ++i) {
                       if (!tp.ok[i]) continue;
                       const T* gcell = gp + i * c;
                       T *p00 = gfp + tp.i00[i], *p01 = gfp + tp.i01[i];
                       T *p10 = gfp + tp.i10[i], *p11 = gfp + tp.i11[i];
                       for (int64_t k = 0; k < c; ++k) {
                         p00[k] += tp.w00[i] * gcell[k];
                         p01[k] += tp.w01[i] * gcell[k];
                         p10[k] += tp.w10[i] * gcell[k];
                         p11[k] += tp.w11[i] * gcell[k];
                       }
                     }
                   });
}

}  // namespace romni
