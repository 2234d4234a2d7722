#pragma once

#include <string>

#include "romni/core/nn.hpp"
#include "romni/core/ops.hpp"
#include "romni/net/params.hpp"

namespace romni {

struct FeatureNetConfig {
  int channels = 4;   // C, also the output channel count
  int blocks = 6;     // residual blocks
  bool norm = true;   // instance normalization inside blocks
};

/// Declare and initialize the extractor weights: a 7x7 stride-2 stem, a
/// stack of pre-activation residual blocks, and a 3x3 projection.
template <typename T>
void init_feature_params(ParamStore<T>& p, const FeatureNetConfig& cfg, Rng& rng) {
  int64_t c = cfg.channels;
  init::he_normal(p.add("feat.stem.w", {7, 7, 3, c}), rng);
  p.add("feat.stem.b", {c});
  for (int i = 0; i < cfg.blocks; ++i) {
    std::string base = "feat.block" + std::to_string(i);
    if (cfg.norm) {
      init::ones(p.add(base + ".norm1.g", {c}));
      p.add(base + ".norm1.b", {c});
      init::ones(p.add(base + ".norm2.g", {c}));
      p.add(base + ".norm2.b", {c});
    }
    init::he_normal(p.add(base + ".conv1.w", {3, 3, c, c}), rng);
    p.add(base + ".conv1.b", {c});
    init::he_normal(p.add(base + ".conv2.w", {3, 3, c, c}), rng);
    p.add(base + ".conv2.b", {c});
  }
  init::he_normal(p.add("feat.proj.w", {3, 3, c, c}), rng);
  p.add("feat.proj.b", {c});
}

/// (h, w, 3) image in [0,1] -> (h/2, w/2, C) features. Fisheye images do
/// not wrap, so all padding is zero.
template <typename T>
Var extract_features(Tape<T>& t, Var image, const VarMap& v, const FeatureNetConfig& cfg) {
  const auto& img = t.val(image);
  if (img.ndim() != 3 || img.dim(2) != 3)
    throw InputError("extract_features: expected (h, w, 3), got " + img.shape_str());
  if (img.dim(0) % 2 != 0 || img.dim(1) % 2 != 0)
    throw InputError("extract_features: image dimensions must be even");

  using namespace ops;
  Var x = conv2d(t, image, v.at("feat.stem.w"), v.at("feat.stem.b"), 2, WidthPad::Zero);
  x = relu(t, x);
  for (int i = 0; i < cfg.blocks; ++i) {
    std::string base = "feat.block" + std::to_string(i);
    Var h = x;
    if (cfg.norm) h = instance_norm(t, h, v.at(base + ".norm1.g"), v.at(base + ".norm1.b"));
    h = relu(t, h);
    h = conv2d(t, h, v.at(base + ".conv1.w"), v.at(base + ".conv1.b"), 1, WidthPad::Zero);
    if (cfg.norm) h = instance_norm(t, h, v.at(base + ".norm2.g"), v.at(base + ".norm2.b"));
    h = relu(t, h);
    h = conv2d(t, h, v.at(base + ".conv2.w"), v.at(base + ".conv2.b"), 1, WidthPad::Zero);
    x = add(t, x, h);
  }
  return conv2d(t, x, v.at("feat.proj.w"), v.at("feat.proj.b"), 1, WidthPad::Zero);
}

}  // namespace romni
