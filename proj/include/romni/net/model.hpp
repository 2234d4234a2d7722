#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "romni/core/tape.hpp"
#include "romni/net/corr.hpp"
#include "romni/net/feature_net.hpp"
#include "romni/net/fusion.hpp"
#include "romni/net/update.hpp"
#include "romni/sweep/warp.hpp"

namespace romni {

struct ModelConfig {
  int channels = 4;  // C
  int blocks = 6;
  bool norm = true;
  FusionMode fusion = FusionMode::AdaptiveOpposite;
  bool grid_embedding = true;
  bool adaptive_context = true;
  int iters = 12;  // M
  int lookup_radius = 4;

  FeatureNetConfig feature_cfg() const { return {channels, blocks, norm}; }
  FusionConfig fusion_cfg() const { return {fusion, grid_embedding, channels}; }
  UpdateConfig update_cfg() const { return {channels, lookup_radius}; }

  void validate() const {
    if (channels < 1) throw ConfigError("model: channels must be >= 1");
    if (blocks < 0) throw ConfigError("model: blocks must be >= 0");
    if (iters < 1) throw ConfigError("model: iters must be >= 1");
    if (lookup_radius < 1) throw ConfigError("model: lookup_radius must be >= 1");
  }
};

template <typename T>
struct ForwardResult {
  std::vector<Var> history;  // one full-resolution (h, w) prediction per iteration
  Var d_half;                // final half-resolution estimate, half-index units
};

/// The whole network: shared feature extractor, spherical warping, volume
/// fusion, correlation pyramid, and the recurrent refinement loop.
template <typename T>
struct Model {
  ModelConfig cfg;
  ParamStore<T> params;

  void init(Rng& rng) {
    cfg.validate();
    init_feature_params(params, cfg.feature_cfg(), rng);
    init_fusion_params(params, cfg.fusion_cfg(), rng);
    init_update_params(params, cfg.update_cfg(), rng);
  }

  /// Build the forward graph for one frame set. `v` holds tape leaves for
  /// every parameter (see ParamStore::leaves). Throws NumericError with the
  /// iteration index if anything goes non-finite mid-loop.
  ForwardResult<T> forward(Tape<T>& t, const std::array<Tensor<T>, 4>& images,
                           const SweepGrids& grids, const VarMap& v,
                           int iters_override = 0) const {
    const int m = iters_override > 0 ? iters_override : cfg.iters;
    const FusionConfig fc = cfg.fusion_cfg();

    std::array<Var, 4> vols{};
    for (int cam = 0; cam < 4; ++cam) {
      Var img = t.leaf(images[static_cast<size_t>(cam)]);
      Var feat = extract_features(t, img, v, cfg.feature_cfg());
      vols[static_cast<size_t>(cam)] = warp_features(t, feat, grids, cam);
    }

    // front(0)/back(2) make the reference volume, right(1)/left(3) the target.
    Var s_ref, s_tgt;
    switch (cfg.fusion) {
      case FusionMode::AdaptiveOpposite: {
        std::optional<Var> gf, gb, gr, gl;
        if (cfg.grid_embedding) {
          auto embed = [&](int cam) {
            return t.leaf(grids.grid_embed[static_cast<size_t>(cam)].template cast<T>());
          };
          gf = embed(0), gb = embed(2), gr = embed(1), gl = embed(3);
        }
        Var w_ref = adaptive_weights(t, vols[0], vols[2], gf, gb, v, fc, "ref");
        Var w_tgt = adaptive_weights(t, vols[1], vols[3], gr, gl, v, fc, "tgt");
        s_ref = fuse_opposite(t, vols[0], vols[2], w_ref);
        s_tgt = fuse_opposite(t, vols[1], vols[3], w_tgt);
        break;
      }
      case FusionMode::Interleave:
        s_ref = fuse_interleave(t, vols[0], vols[2], "ref");
        s_tgt = fuse_interleave(t, vols[3], vols[1], "tgt");
        break;
      case FusionMode::AllWeighting: {
        auto [r, g] = fuse_all_weighting(t, vols, v, fc);
        s_ref = r, s_tgt = g;
        break;
      }
    }

    // The context volume starts as the reference volume; an ablation swaps
    // in zeros. Downstream only samples it, so sharing the var is safe.
    Var ctx = cfg.adaptive_context
                  ? s_ref
                  : t.leaf(Tensor<T>(t.val(s_ref).shape(), T(0)));

    Var corr = correlation_volume(t, s_ref, s_tgt);
    std::vector<Var> pyramid = build_pyramid(t, corr);

    ForwardResult<T> res;
    Var hidden = init_hidden(t, ctx, v);
    Var d = t.leaf(Tensor<T>({int64_t(grids.h2), int64_t(grids.w2)}, T(0)));
    for (int i = 1; i <= m; ++i) {
      Var ctx_feat = sample_context(t, ctx, d);
      Var corr_feat = lookup(t, pyramid, d, cfg.lookup_radius);
      Var x = ops::concat_last(t, {corr_feat, ctx_feat});
      hidden = gru_step(t, hidden, x, v);
      Var delta = predict_delta(t, hidden, v);
      d = ops::add(t, d, delta);
      Var full = convex_upsample(t, d, predict_mask(t, hidden, v));
      if (!all_finite(t.val(hidden)) || !all_finite(t.val(full)))
        throw NumericError("forward: non-finite values at iteration " + std::to_string(i) +
                           " of " + std::to_string(m));
      res.history.push_back(full);
    }
    res.d_half = d;
    return res;
  }
};

/// Convenience overload taking the correlation and context maps separately.
template <typename T>
Var gru_step(Tape<T>& t, Var hidden, Var corr_feat, Var ctx_feat, const VarMap& v) {
  return gru_step(t, hidden, ops::concat_last(t, {corr_feat, ctx_feat}), v);
}

}  // namespace romni
