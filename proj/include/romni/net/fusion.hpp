#pragma once

#include <array>
#include <optional>
#include <string>

#include "romni/core/ops.hpp"
#include "romni/net/params.hpp"

namespace romni {

enum class FusionMode { AdaptiveOpposite, Interleave, AllWeighting };

inline const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::AdaptiveOpposite: return "adaptive";
    case FusionMode::Interleave: return "interleave";
    case FusionMode::AllWeighting: return "all";
  }
  return "?";
}

inline FusionMode fusion_mode_from_name(const std::string& s) {
  if (s == "adaptive") return FusionMode::AdaptiveOpposite;
  if (s == "interleave") return FusionMode::Interleave;
  if (s == "all") return FusionMode::AllWeighting;
  throw ConfigError("unknown fusion mode '" + s + "' (expected adaptive|interleave|all)");
}

struct FusionConfig {
  FusionMode mode = FusionMode::AdaptiveOpposite;
  bool grid_embedding = true;
  int channels = 4;  // C
};

/// Declare the fusion MLPs. Widths: opposite weighting maps 2C (2C+4 with
/// grid embedding) -> C -> 1; all-weighting maps 4C -> C -> 4. Final layers
/// start at zero so fusion begins as the symmetric blend.
template <typename T>
void init_fusion_params(ParamStore<T>& p, const FusionConfig& cfg, Rng& rng) {
  int64_t c = cfg.channels;
  if (cfg.mode == FusionMode::Interleave) return;  // fixed masks, no weights
  int64_t in = cfg.mode == FusionMode::AllWeighting ? 4 * c
                                                    : (cfg.grid_embedding ? 2 * c + 4 : 2 * c);
  int64_t out = cfg.mode == FusionMode::AllWeighting ? 4 : 1;
  for (const char* side : {"ref", "tgt"}) {
    std::string base = std::string("fuse.") + side;
    init::he_normal(p.add(base + ".l1.w", {in, c}), rng);
    p.add(base + ".l1.b", {c});
    p.add(base + ".l2.w", {c, out});  // zeros: sigmoid -> 0.5, softmax -> 0.25
    p.add(base + ".l2.b", {out});
  }
}

namespace ops {

/// w*a + (1-w)*b with w broadcast across the channel axis (last dim 1).
template <typename T>
Var blend_opposite(Tape<T>& t, Var a, Var b, Var w) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  const auto& vw = t.val(w);
  check_same_shape(va, vb, "blend_opposite");
  int64_t c = va.dim(va.ndim() - 1);
  int64_t cells = va.numel() / c;
  if (vw.numel() != cells || vw.dim(vw.ndim() - 1) != 1)
    throw InputError("blend_opposite: weight must have a single channel per cell");
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < cells; ++i) {
    T wi = vw[i];
    for (int64_t k = 0; k < c; ++k)
      out[i * c + k] = wi * va[i * c + k] + (T(1) - wi) * vb[i * c + k];
  }
  bool ng = t.any_needs_grad({a, b, w});
  return t.push(std::move(out), ng, [a, b, w, cells, c](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& va2 = tp.val(a);
    const auto& vb2 = tp.val(b);
    const auto& vw2 = tp.val(w);
    if (tp.needs_grad(a)) {
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < cells; ++i)
        for (int64_t k = 0; k < c; ++k) ga[i * c + k] += g[i * c + k] * vw2[i];
    }
    if (tp.needs_grad(b)) {
      auto& gb = tp.grad(b);
      for (int64_t i = 0; i < cells; ++i)
        for (int64_t k = 0; k < c; ++k) gb[i * c + k] += g[i * c + k] * (T(1) - vw2[i]);
    }
    if (tp.needs_grad(w)) {
      auto& gw = tp.grad(w);
      for (int64_t i = 0; i < cells; ++i) {
        T s = T(0);
        for (int64_t k = 0; k < c; ++k)
          s += g[i * c + k] * (va2[i * c + k] - vb2[i * c + k]);
        gw[i] += s;
      }
    }
  });
}

/// Per-cell weighted sum of four equal-shape volumes; w carries 4 channels.
template <typename T>
Var weighted_sum4(Tape<T>& t, std::array<Var, 4> vols, Var w) {
  const auto& v0 = t.val(vols[0]);
  for (int i = 1; i < 4; ++i) check_same_shape(v0, t.val(vols[i]), "weighted_sum4");
  const auto& vw = t.val(w);
  int64_t c = v0.dim(v0.ndim() - 1);
  int64_t cells = v0.numel() / c;
  if (vw.numel() != cells * 4) throw InputError("weighted_sum4: weights must have 4 channels");
  Tensor<T> out(v0.shape(), T(0));
  for (int q = 0; q < 4; ++q) {
    const auto& vq = t.val(vols[static_cast<size_t>(q)]);
    for (int64_t i = 0; i < cells; ++i) {
      T wi = vw[i * 4 + q];
      for (int64_t k = 0; k < c; ++k) out[i * c + k] += wi * vq[i * c + k];
    }
  }
  bool ng = t.needs_grad(w);
  for (Var v : vols) ng = ng || t.needs_grad(v);
  return t.push(std::move(out), ng, [vols, w, cells, c](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& vw2 = tp.val(w);
    for (int q = 0; q < 4; ++q) {
      Var vq = vols[static_cast<size_t>(q)];
      if (tp.needs_grad(vq)) {
        auto& gv = tp.grad(vq);
        for (int64_t i = 0; i < cells; ++i) {
          T wi = vw2[i * 4 + q];
          for (int64_t k = 0; k < c; ++k) gv[i * c + k] += wi * g[i * c + k];
        }
      }
    }
    if (tp.needs_grad(w)) {
      auto& gw = tp.grad(w);
      for (int q = 0; q < 4; ++q) {
        const auto& vq = tp.val(vols[static_cast<size_t>(q)]);
        for (int64_t i = 0; i < cells; ++i) {
          T s = T(0);
          for (int64_t k = 0; k < c; ++k) s += g[i * c + k] * vq[i * c + k];
          gw[i * 4 + q] += s;
        }
      }
    }
  });
}

}  // namespace ops

/// Per-cell sigmoid blend weight from the channel concatenation of the two
/// opposite volumes (plus their grid embeddings when enabled).
template <typename T>
Var adaptive_weights(Tape<T>& t, Var s_a, Var s_b, std::optional<Var> g_a, std::optional<Var> g_b,
                     const VarMap& v, const FusionConfig& cfg, const std::string& side) {
  if (cfg.grid_embedding != (g_a.has_value() && g_b.has_value()))
    throw InputError("adaptive_weights: grid embeddings must be present iff enabled");
  check_same_shape(t.val(s_a), t.val(s_b), "adaptive_weights");
  std::vector<Var> parts{s_a, s_b};
  if (cfg.grid_embedding) {
    parts.push_back(*g_a);
    parts.push_back(*g_b);
  }
  std::string base = "fuse." + side;
  Var x = ops::concat_last(t, parts);
  int64_t expect = cfg.grid_embedding ? 2 * cfg.channels + 4 : 2 * cfg.channels;
  if (t.val(x).dim(t.val(x).ndim() - 1) != expect)
    throw InputError("adaptive_weights: MLP input width mismatch");
  Var h = ops::relu(t, ops::linear_cells(t, x, v.at(base + ".l1.w"), v.at(base + ".l1.b")));
  return ops::sigmoid(t, ops::linear_cells(t, h, v.at(base + ".l2.w"), v.at(base + ".l2.b")));
}

/// Convex combination of the two opposite volumes under a weight map.
template <typename T>
Var fuse_opposite(Tape<T>& t, Var s_a, Var s_b, Var w) {
  return ops::blend_opposite(t, s_a, s_b, w);
}

/// Fixed-mask fallback. ref: middle-half theta columns from s_a (front),
/// outer quarters from s_b (back). tgt: left half from s_a (left camera),
/// right half from s_b (right camera). Masks do not depend on the sphere.
template <typename T>
Var fuse_interleave(Tape<T>& t, Var s_a, Var s_b, const std::string& side) {
  const auto& va = t.val(s_a);
  const auto& vb = t.val(s_b);
  check_same_shape(va, vb, "fuse_interleave");
  if (va.ndim() != 4) throw InputError("fuse_interleave: expected (h2, w2, n2, C)");
  int64_t w2 = va.dim(1);
  if (w2 % 4 != 0) throw InputError("fuse_interleave: width must be divisible by 4");
  bool ref = side == "ref";
  if (!ref && side != "tgt") throw InputError("fuse_interleave: side must be ref or tgt");
  int64_t h2 = va.dim(0);
  int64_t inner = va.dim(2) * va.dim(3);  // contiguous (n2, C) block per column
  auto from_a = [w2, ref](int64_t j) {
    return ref ? (j >= w2 / 4 && j < 3 * w2 / 4) : (j < w2 / 2);
  };
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < h2; ++i)
    for (int64_t j = 0; j < w2; ++j) {
      const auto& src = from_a(j) ? va : vb;
      int64_t off = (i * w2 + j) * inner;
      for (int64_t k = 0; k < inner; ++k) out[off + k] = src[off + k];
    }
  bool ng = t.any_needs_grad({s_a, s_b});
  return t.push(std::move(out), ng, [s_a, s_b, h2, w2, inner, from_a](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    for (int64_t i = 0; i < h2; ++i)
      for (int64_t j = 0; j < w2; ++j) {
        Var target = from_a(j) ? s_a : s_b;
        if (!tp.needs_grad(target)) continue;
        auto& gt = tp.grad(target);
        int64_t off = (i * w2 + j) * inner;
        for (int64_t k = 0; k < inner; ++k) gt[off + k] += g[off + k];
      }
  });
}

/// All-weighting ablation: softmax over four per-camera weights for each of
/// the reference and target volumes.
template <typename T>
std::pair<Var, Var> fuse_all_weighting(Tape<T>& t, std::array<Var, 4> vols, const VarMap& v,
                                       const FusionConfig& cfg) {
  Var x = ops::concat_last(t, {vols[0], vols[1], vols[2], vols[3]});
  if (t.val(x).dim(t.val(x).ndim() - 1) != 4 * cfg.channels)
    throw InputError("fuse_all_weighting: MLP input width mismatch");
  auto run = [&](const std::string& side) {
    std::string base = "fuse." + side;
    Var h = ops::relu(t, ops::linear_cells(t, x, v.at(base + ".l1.w"), v.at(base + ".l1.b")));
    Var w = ops::softmax_last(
        t, ops::linear_cells(t, h, v.at(base + ".l2.w"), v.at(base + ".l2.b")));
    return ops::weighted_sum4(t, vols, w);
  };
  return {run("ref"), run("tgt")};
}

}  // namespace romni
