#pragma once

#include <cmath>
#include <cstdint>

#include "romni/core/ops.hpp"
#include "romni/core/tape.hpp"

namespace romni::ops {

/// Horizontal boundary rule for 2-d convolutions. Panoramas wrap around in
/// azimuth, so width padding is circular; height (polar angle) always pads
/// with zeros.
enum class WidthPad { Zero, Circular };

/// 2-d convolution on an (H, W, Cin) tensor with an (KH, KW, Cin, Cout)
/// kernel, "same" padding of K/2 on each side, and an optional stride.
template <typename T>
Var conv2d(Tape<T>& t, Var x, Var w, Var b, int stride = 1, WidthPad wpad = WidthPad::Circular) {
  const auto& vx = t.val(x);
  const auto& vw = t.val(w);
  const auto& vb = t.val(b);
  if (vx.ndim() != 3) throw InputError("conv2d: input must be (H, W, C), got " + vx.shape_str());
  if (vw.ndim() != 4) throw InputError("conv2d: weight must be (KH, KW, Cin, Cout)");
  const int64_t h = vx.dim(0), wd = vx.dim(1), cin = vx.dim(2);
  const int64_t kh = vw.dim(0), kw = vw.dim(1), cout = vw.dim(3);
  if (vw.dim(2) != cin)
    throw InputError("conv2d: channel mismatch " + vx.shape_str() + " vs " + vw.shape_str());
  if (vb.numel() != cout) throw InputError("conv2d: bias size mismatch");
  if (stride < 1) throw InputError("conv2d: stride must be >= 1");
  const int64_t ph = kh / 2, pw = kw / 2;
  const int64_t oh = (h + 2 * ph - kh) / stride + 1;
  const int64_t ow = (wd + 2 * pw - kw) / stride + 1;

  Tensor<T> out({oh, ow, cout});
  const T* xp = vx.data();
  const T* wp = vw.data();
  const T* bp = vb.data();
  T* op = out.data();
  for (int64_t oy = 0; oy < oh; ++oy) {
    for (int64_t ox = 0; ox < ow; ++ox) {
      T* ocell = op + (oy * ow + ox) * cout;
      for (int64_t co = 0; co < cout; ++co) ocell[co] = bp[co];
      for (int64_t ky = 0; ky < kh; ++ky) {
        int64_t iy = oy * stride + ky - ph;
        if (iy < 0 || iy >= h) continue;
        for (int64_t kx = 0; kx < kw; ++kx) {
          int64_t ix = ox * stride + kx - pw;
          if (wpad == WidthPad::Circular)
            ix = (ix % wd + wd) % wd;
          else if (ix < 0 || ix >= wd)
            continue;
          const T* xcell = xp + (iy * wd + ix) * cin;
          const T* wblock = wp + (ky * kw + kx) * cin * cout;
          for (int64_t ci = 0; ci < cin; ++ci) {
            T a = xcell[ci];
            if (a == T(0)) continue;
            const T* wrow = wblock + ci * cout;
            for (int64_t co = 0; co < cout; ++co) ocell[co] += a * wrow[co];
          }
        }
      }
    }
  }

  bool ng = t.any_needs_grad({x, w, b});
  return t.push(std::move(out), ng,
                [x, w, b, h, wd, cin, kh, kw, cout, stride, wpad, ph, pw, oh, ow](Tape<T>& tp, int self) {
                  const auto& g = tp.grad(Var{self});
                  const auto& vx2 = tp.val(x);
                  const auto& vw2 = tp.val(w);
                  const T* gp = g.data();
                  const T* xp2 = vx2.data();
                  const T* wp2 = vw2.data();
                  const bool gx_on = tp.needs_grad(x);
                  const bool gw_on = tp.needs_grad(w);
                  T* gxp = gx_on ? tp.grad(x).data() : nullptr;
                  T* gwp = gw_on ? tp.grad(w).data() : nullptr;
                  if (tp.needs_grad(b)) {
                    T* gbp = tp.grad(b).data();
                    for (int64_t i = 0; i < oh * ow; ++i)
                      for (int64_t co = 0; co < cout; ++co) gbp[co] += gp[i * cout + co];
                  }
                  if (!gx_on && !gw_on) return;
                  for (int64_t oy = 0; oy < oh; ++oy) {
                    for (int64_t ox = 0; ox < ow; ++ox) {
                      const T* gcell = gp + (oy * ow + ox) * cout;
                      for (int64_t ky = 0; ky < kh; ++ky) {
                        int64_t iy = oy * stride + ky - ph;
                        if (iy < 0 || iy >= h) continue;
                        for (int64_t kx = 0; kx < kw; ++kx) {
                          int64_t ix = ox * stride + kx - pw;
                          if (wpad == WidthPad::Circular)
                            ix = (ix % wd + wd) % wd;
                          else if (ix < 0 || ix >= wd)
                            continue;
                          const int64_t cell = (iy * wd + ix) * cin;
                          const int64_t blk = (ky * kw + kx) * cin * cout;
                          for (int64_t ci = 0; ci < cin; ++ci) {
                            const T* wrow = wp2 + blk + ci * cout;
                            if (gx_on) {
                              T s = T(0);
                              for (int64_t co = 0; co < cout; ++co) s += gcell[co] * wrow[co];
                              gxp[cell + ci] += s;
                            }
                            if (gw_on) {
                              T a = xp2[cell + ci];
                              if (a != T(0)) {
                                T* gwrow = gwp + blk + ci * cout;
                                for (int64_t co = 0; co < cout; ++co) gwrow[co] += a * gcell[co];
                              }
                            }
                          }
                        }
                      }
                    }
                  }
                });
}

/// Instance normalization over the spatial extent of an (H, W, C) tensor,
/// with learnable per-channel gain and bias.
template <typename T>
Var instance_norm(Tape<T>& t, Var x, Var gamma, Var beta, T eps = T(1e-5)) {
  const auto& vx = t.val(x);
  if (vx.ndim() != 3) throw InputError("instance_norm: input must be (H, W, C)");
  const int64_t n = vx.dim(0) * vx.dim(1);
  const int64_t c = vx.dim(2);
  const auto& vg = t.val(gamma);
  const auto& vb = t.val(beta);
  if (vg.numel() != c || vb.numel() != c) throw InputError("instance_norm: affine size mismatch");

  std::vector<T> mean(static_cast<size_t>(c), T(0)), istd(static_cast<size_t>(c), T(0));
  const T* xp = vx.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < c; ++k) mean[static_cast<size_t>(k)] += xp[i * c + k];
  for (int64_t k = 0; k < c; ++k) mean[static_cast<size_t>(k)] /= static_cast<T>(n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < c; ++k) {
      T d = xp[i * c + k] - mean[static_cast<size_t>(k)];
      istd[static_cast<size_t>(k)] += d * d;
    }
  for (int64_t k = 0; k < c; ++k)
    istd[static_cast<size_t>(k)] = T(1) / std::sqrt(istd[static_cast<size_t>(k)] / static_cast<T>(n) + eps);

  Tensor<T> out(vx.shape());
  T* op = out.data();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < c; ++k) {
      size_t ks = static_cast<size_t>(k);
      op[i * c + k] = (xp[i * c + k] - mean[ks]) * istd[ks] * vg[k] + vb[k];
    }

  bool ng = t.any_needs_grad({x, gamma, beta});
  return t.push(std::move(out), ng,
                [x, gamma, beta, n, c, mean, istd](Tape<T>& tp, int self) {
                  const auto& g = tp.grad(Var{self});
                  const auto& vx2 = tp.val(x);
                  const auto& vg2 = tp.val(gamma);
                  const T* gp = g.data();
                  const T* xp2 = vx2.data();
                  // xhat = (x - mean) * istd
                  if (tp.needs_grad(gamma)) {
                    auto& gg = tp.grad(gamma);
                    for (int64_t i = 0; i < n; ++i)
                      for (int64_t k = 0; k < c; ++k) {
                        size_t ks = static_cast<size_t>(k);
                        gg[k] += gp[i * c + k] * (xp2[i * c + k] - mean[ks]) * istd[ks];
                      }
                  }
                  if (tp.needs_grad(beta)) {
                    auto& gb = tp.grad(beta);
                    for (int64_t i = 0; i < n; ++i)
                      for (int64_t k = 0; k < c; ++k) gb[k] += gp[i * c + k];
                  }
                  if (tp.needs_grad(x)) {
                    auto& gx = tp.grad(x);
                    // d/dx of (xhat * gamma): gamma*istd*(gy - mean(gy) - xhat*mean(gy*xhat))
                    std::vector<T> gsum(static_cast<size_t>(c), T(0)), gxhat(static_cast<size_t>(c), T(0));
                    for (int64_t i = 0; i < n; ++i)
                      for (int64_t k = 0; k < c; ++k) {
                        size_t ks = static_cast<size_t>(k);
                        T xh = (xp2[i * c + k] - mean[ks]) * istd[ks];
                        gsum[ks] += gp[i * c + k];
                        gxhat[ks] += gp[i * c + k] * xh;
                      }
                    for (int64_t i = 0; i < n; ++i)
                      for (int64_t k = 0; k < c; ++k) {
                        size_t ks = static_cast<size_t>(k);
                        T xh = (xp2[i * c + k] - mean[ks]) * istd[ks];
                        gx[i * c + k] += vg2[k] * istd[ks] *
                                         (gp[i * c + k] - gsum[ks] / static_cast<T>(n) -
                                          xh * gxhat[ks] / static_cast<T>(n));
                      }
                  }
                });
}

}  // namespace romni::ops
