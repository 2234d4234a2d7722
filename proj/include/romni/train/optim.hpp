#pragma once

#include <cmath>
#include <vector>

#include "romni/core/error.hpp"
#include "romni/net/params.hpp"

namespace romni {

/// One-cycle schedule: linear warmup over the first 5% of steps, cosine
/// decay to zero afterwards. Returns the learning rate for 0-based `step`
/// out of `total` steps.
inline double one_cycle_lr(int64_t step, int64_t total, double max_lr) {
  if (total < 1) throw InputError("one_cycle_lr: total steps must be >= 1");
  if (!(max_lr > 0)) throw InputError("one_cycle_lr: max_lr must be positive");
  if (step < 0 || step >= total) throw InputError("one_cycle_lr: step out of range");
  int64_t warm = std::max<int64_t>(1, total / 20);
  if (step < warm) return max_lr * static_cast<double>(step + 1) / static_cast<double>(warm);
  double p = static_cast<double>(step - warm) / static_cast<double>(std::max<int64_t>(1, total - warm));
  return max_lr * 0.5 * (1.0 + std::cos(M_PI * p));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // decoupled
  double clip_norm = 1.0;      // global gradient clip; <= 0 disables
};

/// Decoupled-weight-decay Adam over a ParamStore. Moment buffers follow the
/// parameter declaration order and are part of the checkpoint.
template <typename T>
class AdamW {
 public:
  AdamW(ParamStore<T>& params, AdamWConfig cfg = {}) : params_(params), cfg_(cfg) {
    for (const auto& e : params.entries()) {
      m_.emplace_back(e.value.shape());
      v_.emplace_back(e.value.shape());
    }
  }

  const AdamWConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }

  /// Global-norm clip across all gradient tensors; returns the pre-clip norm.
  static double clip_gradients(std::vector<Tensor<T>>& grads, double max_norm) {
    double sq = 0;
    for (const auto& g : grads)
      for (int64_t i = 0; i < g.numel(); ++i) sq += static_cast<double>(g[i]) * g[i];
    double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
      T s = static_cast<T>(max_norm / norm);
      for (auto& g : grads)
        for (int64_t i = 0; i < g.numel(); ++i) g[i] *= s;
    }
    return norm;
  }

  /// Apply one update from per-parameter gradients (same order as the store).
  /// Returns the pre-clip global gradient norm.
  double step(std::vector<Tensor<T>> grads, double lr) {
    auto& entries = params_.entries();
    if (grads.size() != entries.size()) throw InputError("AdamW: gradient list size mismatch");
    for (size_t k = 0; k < grads.size(); ++k)
      if (!grads[k].same_shape(entries[k].value)) throw InputError("AdamW: gradient shape mismatch");
    for (const auto& g : grads)
      if (!all_finite(g)) throw NumericError("AdamW: non-finite gradient");

    double norm = clip_gradients(grads, cfg_.clip_norm);
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t k = 0; k < grads.size(); ++k) {
      auto& w = entries[k].value;
      auto& m = m_[k];
      auto& v = v_[k];
      for (int64_t i = 0; i < w.numel(); ++i) {
        double g = static_cast<double>(grads[k][i]);
        double mi = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g;
        double vi = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        double upd = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
        // decoupled decay: shrink the weight directly, not through the moments
        w[i] = static_cast<T>(w[i] - lr * upd - lr * cfg_.weight_decay * w[i]);
      }
    }
    return norm;
  }

  std::vector<Tensor<T>>& moments1() { return m_; }
  std::vector<Tensor<T>>& moments2() { return v_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  ParamStore<T>& params_;
  AdamWConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  int64_t step_ = 0;
};

}  // namespace romni
