#pragma once

#include <vector>

#include "romni/core/ops.hpp"
#include "romni/net/params.hpp"

namespace romni {

/// Channelwise inner product of the reference and target volumes:
/// (h2, w2, n2, C) x 2 -> (h2, w2, n2).
template <typename T>
Var correlation_volume(Tape<T>& t, Var s_ref, Var s_tgt) {
  const auto& a = t.val(s_ref);
  const auto& b = t.val(s_tgt);
  check_same_shape(a, b, "correlation_volume");
  if (a.ndim() != 4) throw InputError("correlation_volume: expected (h2, w2, n2, C)");
  int64_t c = a.dim(3);
  int64_t cells = a.numel() / c;
  Tensor<T> out({a.dim(0), a.dim(1), a.dim(2)});
  for (int64_t i = 0; i < cells; ++i) {
    T s = T(0);
    for (int64_t k = 0; k < c; ++k) s += a[i * c + k] * b[i * c + k];
    out[i] = s;
  }
  bool ng = t.any_needs_grad({s_ref, s_tgt});
  return t.push(std::move(out), ng, [s_ref, s_tgt, cells, c](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& a2 = tp.val(s_ref);
    const auto& b2 = tp.val(s_tgt);
    if (tp.needs_grad(s_ref)) {
      auto& ga = tp.grad(s_ref);
      for (int64_t i = 0; i < cells; ++i)
        for (int64_t k = 0; k < c; ++k) ga[i * c + k] += g[i] * b2[i * c + k];
    }
    if (tp.needs_grad(s_tgt)) {
      auto& gb = tp.grad(s_tgt);
      for (int64_t i = 0; i < cells; ++i)
        for (int64_t k = 0; k < c; ++k) gb[i * c + k] += g[i] * a2[i * c + k];
    }
  });
}

/// Non-overlapping window-2 mean along the last axis.
template <typename T>
Var mean_pool_last(Tape<T>& t, Var x) {
  const auto& vx = t.val(x);
  int64_t n = vx.dim(vx.ndim() - 1);
  if (n % 2 != 0) throw InputError("mean_pool_last: extent must be even");
  int64_t rows = vx.numel() / n;
  std::vector<int64_t> shape = vx.shape();
  shape.back() = n / 2;
  Tensor<T> out(shape);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t i = 0; i < n / 2; ++i)
      out[r * (n / 2) + i] = (vx[r * n + 2 * i] + vx[r * n + 2 * i + 1]) * T(0.5);
  return t.push(std::move(out), t.needs_grad(x), [x, rows, n](Tape<T>& tp, int self) {
    if (!tp.needs_grad(x)) return;
    const auto& g = tp.grad(Var{self});
    auto& gx = tp.grad(x);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t i = 0; i < n / 2; ++i) {
        T h = g[r * (n / 2) + i] * T(0.5);
        gx[r * n + 2 * i] += h;
        gx[r * n + 2 * i + 1] += h;
      }
  });
}

/// 4-level pyramid: the raw correlation plus three factor-2 mean-pooled
/// copies along the inverse-depth axis.
template <typename T>
std::vector<Var> build_pyramid(Tape<T>& t, Var corr) {
  const auto& v = t.val(corr);
  if (v.dim(v.ndim() - 1) % 8 != 0)
    throw InputError("build_pyramid: depth extent must be divisible by 8");
  std::vector<Var> levels{corr};
  for (int i = 0; i < 3; ++i) levels.push_back(mean_pool_last(t, levels.back()));
  return levels;
}

/// Sample every pyramid level at d / 2^level + k for k in [-r, r], linear
/// interpolation with zero padding outside the level extent. Output has
/// 4*(2r+1) channels; differentiable in both the pyramid and d.
template <typename T>
Var lookup(Tape<T>& t, const std::vector<Var>& pyramid, Var d, int r = 4) {
  if (pyramid.size() != 4) throw InputError("lookup: expected a 4-level pyramid");
  const auto& vd = t.val(d);
  if (vd.ndim() != 2) throw InputError("lookup: d must be (h2, w2)");
  int64_t cells = vd.numel();
  const int taps = 2 * r + 1;
  const int64_t cout = 4 * taps;
  Tensor<T> out({vd.dim(0), vd.dim(1), cout});

  for (int lvl = 0; lvl < 4; ++lvl) {
    const auto& corr = t.val(pyramid[static_cast<size_t>(lvl)]);
    int64_t n = corr.dim(corr.ndim() - 1);
    T inv = T(1) / static_cast<T>(1 << lvl);
    for (int64_t i = 0; i < cells; ++i) {
      T pos0 = vd[i] * inv;
      for (int k = -r; k <= r; ++k) {
        T p = pos0 + static_cast<T>(k);
        int64_t i0 = static_cast<int64_t>(std::floor(p));
        T frac = p - static_cast<T>(i0);
        T v0 = (i0 >= 0 && i0 < n) ? corr[i * n + i0] : T(0);
        T v1 = (i0 + 1 >= 0 && i0 + 1 < n) ? corr[i * n + i0 + 1] : T(0);
        out[i * cout + lvl * taps + (k + r)] = (T(1) - frac) * v0 + frac * v1;
      }
    }
  }

  std::vector<Var> pyr(pyramid);
  bool ng = t.needs_grad(d);
  for (Var p : pyr) ng = ng || t.needs_grad(p);
  return t.push(std::move(out), ng, [pyr, d, cells, r, taps, cout](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& vd2 = tp.val(d);
    const bool want_d = tp.needs_grad(d);
    for (int lvl = 0; lvl < 4; ++lvl) {
      Var pv = pyr[static_cast<size_t>(lvl)];
      const auto& corr = tp.val(pv);
      int64_t n = corr.dim(corr.ndim() - 1);
      T inv = T(1) / static_cast<T>(1 << lvl);
      const bool want_p = tp.needs_grad(pv);
      if (!want_p && !want_d) continue;
      for (int64_t i = 0; i < cells; ++i) {
        T pos0 = vd2[i] * inv;
        T dacc = T(0);
        for (int k = -r; k <= r; ++k) {
          T go = g[i * cout + lvl * taps + (k + r)];
          if (go == T(0)) continue;
          T p = pos0 + static_cast<T>(k);
          int64_t i0 = static_cast<int64_t>(std::floor(p));
          T frac = p - static_cast<T>(i0);
          bool in0 = i0 >= 0 && i0 < n;
          bool in1 = i0 + 1 >= 0 && i0 + 1 < n;
          if (want_p) {
            auto& gc = tp.grad(pv);
            if (in0) gc[i * n + i0] += go * (T(1) - frac);
            if (in1) gc[i * n + i0 + 1] += go * frac;
          }
          if (want_d) {
            T v0 = in0 ? corr[i * n + i0] : T(0);
            T v1 = in1 ? corr[i * n + i0 + 1] : T(0);
            dacc += go * (v1 - v0);
          }
        }
        if (want_d) tp.grad(d)[i] += dacc * inv;
      }
    }
  });
}

/// Linear sample of the context volume along the depth axis at the current
/// estimate, clamped to the valid range (context never vanishes).
template <typename T>
Var sample_context(Tape<T>& t, Var ctx, Var d) {
  const auto& vc = t.val(ctx);
  const auto& vd = t.val(d);
  if (vc.ndim() != 4) throw InputError("sample_context: ctx must be (h2, w2, n2, C)");
  if (vd.ndim() != 2 || vd.dim(0) != vc.dim(0) || vd.dim(1) != vc.dim(1))
    throw InputError("sample_context: d shape mismatch");
  int64_t cells = vd.numel();
  int64_t n = vc.dim(2), c = vc.dim(3);
  Tensor<T> out({vc.dim(0), vc.dim(1), c});

  for (int64_t i = 0; i < cells; ++i) {
    T p = std::min(std::max(vd[i], T(0)), static_cast<T>(n - 1));
    int64_t i0 = std::min(static_cast<int64_t>(p), n - 2);
    if (n < 2) i0 = 0;
    T frac = p - static_cast<T>(i0);
    const T* c0 = vc.data() + (i * n + i0) * c;
    const T* c1 = vc.data() + (i * n + std::min(i0 + 1, n - 1)) * c;
    for (int64_t k = 0; k < c; ++k) out[i * c + k] = (T(1) - frac) * c0[k] + frac * c1[k];
  }

  bool ng = t.any_needs_grad({ctx, d});
  return t.push(std::move(out), ng, [ctx, d, cells, n, c](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& vc2 = tp.val(ctx);
    const auto& vd2 = tp.val(d);
    const bool want_c = tp.needs_grad(ctx);
    const bool want_d = tp.needs_grad(d);
    for (int64_t i = 0; i < cells; ++i) {
      T raw = vd2[i];
      bool clamped = raw <= T(0) || raw >= static_cast<T>(n - 1);
      T p = std::min(std::max(raw, T(0)), static_cast<T>(n - 1));
      int64_t i0 = std::min(static_cast<int64_t>(p), n - 2);
      if (n < 2) i0 = 0;
      T frac = p - static_cast<T>(i0);
      int64_t i1 = std::min(i0 + 1, n - 1);
      if (want_c) {
        auto& gc = tp.grad(ctx);
        for (int64_t k = 0; k < c; ++k) {
          gc[(i * n + i0) * c + k] += g[i * c + k] * (T(1) - frac);
          gc[(i * n + i1) * c + k] += g[i * c + k] * frac;
        }
      }
      if (want_d && !clamped) {
        T s = T(0);
        const T* c0 = vc2.data() + (i * n + i0) * c;
        const T* c1 = vc2.data() + (i * n + i1) * c;
        for (int64_t k = 0; k < c; ++k) s += g[i * c + k] * (c1[k] - c0[k]);
        tp.grad(d)[i] += s;
      }
    }
  });
}

}  // namespace romni
