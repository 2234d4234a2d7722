#pragma once

#include <cmath>
#include <string>

#include "romni/core/nn.hpp"
#include "romni/core/ops.hpp"
#include "romni/net/corr.hpp"
#include "romni/net/params.hpp"

namespace romni {

struct UpdateConfig {
  int channels = 4;      // C; the GRU hidden size is 2C
  int lookup_radius = 4;  // r
  int corr_channels() const { return 4 * (2 * lookup_radius + 1); }
  int input_channels() const { return corr_channels() + channels; }  // corr + context
  int hidden_channels() const { return 2 * channels; }
};

/// GRU gates, residual head, upsampling-mask head, and the 1x1 projection
/// that turns the C-channel context slice into the initial 2C hidden state.
/// The residual and mask finals start at zero: iteration 0 predicts "no
/// change" and the upsampler starts as a plain 3x3 average.
template <typename T>
void init_update_params(ParamStore<T>& p, const UpdateConfig& cfg, Rng& rng) {
  int64_t c = cfg.channels, h = cfg.hidden_channels(), x = cfg.input_channels();
  init::he_normal(p.add("upd.init.w", {1, 1, c, h}), rng);
  p.add("upd.init.b", {h});
  for (const char* gate : {"z", "r", "h"}) {
    init::he_normal(p.add(std::string("upd.gru.") + gate + ".w", {3, 3, h + x, h}), rng);
    p.add(std::string("upd.gru.") + gate + ".b", {h});
  }
  init::he_normal(p.add("upd.delta.c1.w", {3, 3, h, c}), rng);
  p.add("upd.delta.c1.b", {c});
  p.add("upd.delta.c2.w", {3, 3, c, 1});
  p.add("upd.delta.c2.b", {1});
  init::he_normal(p.add("upd.mask.c1.w", {3, 3, h, c}), rng);
  p.add("upd.mask.c1.b", {c});
  p.add("upd.mask.c2.w", {3, 3, c, 36});
  p.add("upd.mask.c2.b", {36});
}

/// hidden = tanh(1x1 conv of the context volume sampled at d = 0).
template <typename T>
Var init_hidden(Tape<T>& t, Var ctx, const VarMap& v) {
  const auto& vc = t.val(ctx);
  Var zero = t.leaf(Tensor<T>({vc.dim(0), vc.dim(1)}, T(0)), false);
  Var slice0 = sample_context(t, ctx, zero);
  return ops::tanh_(
      t, ops::conv2d(t, slice0, v.at("upd.init.w"), v.at("upd.init.b"), 1,
                     ops::WidthPad::Circular));
}

/// One convolutional GRU step over the panorama grid (theta axis wraps).
template <typename T>
Var gru_step(Tape<T>& t, Var hidden, Var x, const VarMap& v) {
  using namespace ops;
  Var hx = concat_last(t, {hidden, x});
  Var z = sigmoid(t, conv2d(t, hx, v.at("upd.gru.z.w"), v.at("upd.gru.z.b")));
  Var r = sigmoid(t, conv2d(t, hx, v.at("upd.gru.r.w"), v.at("upd.gru.r.b")));
  Var rhx = concat_last(t, {mul(t, r, hidden), x});
  Var h_tilde = tanh_(t, conv2d(t, rhx, v.at("upd.gru.h.w"), v.at("upd.gru.h.b")));
  return add(t, mul(t, one_minus(t, z), hidden), mul(t, z, h_tilde));
}

/// Residual inverse-depth map from the hidden state: (h2, w2).
template <typename T>
Var predict_delta(Tape<T>& t, Var hidden, const VarMap& v) {
  using namespace ops;
  Var a = relu(t, conv2d(t, hidden, v.at("upd.delta.c1.w"), v.at("upd.delta.c1.b")));
  Var b = conv2d(t, a, v.at("upd.delta.c2.w"), v.at("upd.delta.c2.b"));
  const auto& vb = t.val(b);
  return reshape(t, b, {vb.dim(0), vb.dim(1)});
}

/// Upsampling mask logits, (h2, w2, 2, 2, 9).
template <typename T>
Var predict_mask(Tape<T>& t, Var hidden, const VarMap& v) {
  using namespace ops;
  Var a = relu(t, conv2d(t, hidden, v.at("upd.mask.c1.w"), v.at("upd.mask.c1.b")));
  Var b = conv2d(t, a, v.at("upd.mask.c2.w"), v.at("upd.mask.c2.b"));
  const auto& vb = t.val(b);
  return reshape(t, b, {vb.dim(0), vb.dim(1), 2, 2, 9});
}

/// Factor-2 convex upsampling: each fine pixel is a softmax-weighted blend
/// of the 3x3 coarse neighborhood of its parent (replicated borders), then
/// doubled to convert half-index units into full-index units.
template <typename T>
Var convex_upsample(Tape<T>& t, Var d, Var mask_logits) {
  const auto& vd = t.val(d);
  const auto& vm = t.val(mask_logits);
  if (vd.ndim() != 2) throw InputError("convex_upsample: d must be (h2, w2)");
  int64_t h2 = vd.dim(0), w2 = vd.dim(1);
  if (vm.ndim() != 5 || vm.dim(0) != h2 || vm.dim(1) != w2 || vm.dim(2) != 2 ||
      vm.dim(3) != 2 || vm.dim(4) != 9)
    throw InputError("convex_upsample: mask must be (h2, w2, 2, 2, 9)");
  for (int64_t i = 0; i < vm.numel(); ++i)
    if (!std::isfinite(static_cast<double>(vm[i])))
      throw InputError("convex_upsample: non-finite mask logits");

  Var w = ops::softmax_last(t, mask_logits);
  // the softmax push may reallocate node storage; re-acquire references
  const auto& vw = t.val(w);
  const auto& vdr = t.val(d);

  Tensor<T> out({2 * h2, 2 * w2});
  auto clampi = [](int64_t x, int64_t n) { return std::min(std::max(x, int64_t(0)), n - 1); };
  for (int64_t i = 0; i < h2; ++i)
    for (int64_t j = 0; j < w2; ++j)
      for (int64_t di = 0; di < 2; ++di)
        for (int64_t dj = 0; dj < 2; ++dj) {
          const T* wk = vw.data() + (((i * w2 + j) * 2 + di) * 2 + dj) * 9;
          T acc = T(0);
          for (int64_t k = 0; k < 9; ++k) {
            int64_t ni = clampi(i + k / 3 - 1, h2);
            int64_t nj = clampi(j + k % 3 - 1, w2);
            acc += wk[k] * vdr[ni * w2 + nj];
          }
          out[(2 * i + di) * (2 * w2) + (2 * j + dj)] = T(2) * acc;
        }

  bool ng = t.any_needs_grad({d, w});
  return t.push(std::move(out), ng, [d, w, h2, w2](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& vd2 = tp.val(d);
    const auto& vw2 = tp.val(w);
    const bool want_d = tp.needs_grad(d);
    const bool want_w = tp.needs_grad(w);
    auto clampi = [](int64_t x, int64_t n) { return std::min(std::max(x, int64_t(0)), n - 1); };
    for (int64_t i = 0; i < h2; ++i)
      for (int64_t j = 0; j < w2; ++j)
        for (int64_t di = 0; di < 2; ++di)
          for (int64_t dj = 0; dj < 2; ++dj) {
            T go = T(2) * g[(2 * i + di) * (2 * w2) + (2 * j + dj)];
            if (go == T(0)) continue;
            int64_t base = (((i * w2 + j) * 2 + di) * 2 + dj) * 9;
            for (int64_t k = 0; k < 9; ++k) {
              int64_t ni = clampi(i + k / 3 - 1, h2);
              int64_t nj = clampi(j + k % 3 - 1, w2);
              if (want_d) tp.grad(d)[ni * w2 + nj] += go * vw2[base + k];
              if (want_w) tp.grad(w)[base + k] += go * vd2[ni * w2 + nj];
            }
          }
  });
}

}  // namespace romni
