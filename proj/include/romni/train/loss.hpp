#pragma once

#include <cmath>
#include <vector>

#include "romni/core/ops.hpp"
#include "romni/core/tape.hpp"

namespace romni {

/// Per-iteration loss weights [gamma^(M-1), ..., gamma, 1].
inline std::vector<double> loss_weights(int m, double gamma) {
  if (m < 1) throw InputError("loss_weights: need at least one iteration");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("loss_weights: gamma must be in (0,1]");
  std::vector<double> w(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) w[static_cast<size_t>(i)] = std::pow(gamma, m - 1 - i);
  return w;
}

/// Exponentially weighted sum of masked mean-absolute errors, later
/// iterations weighted more. Predictions and gt are full-index maps.
template <typename T>
Var sequence_loss(Tape<T>& t, const std::vector<Var>& history, const Tensor<T>& gt,
                  const Tensor<uint8_t>& mask, double gamma = 0.9) {
  auto w = loss_weights(static_cast<int>(history.size()), gamma);
  Var total{-1};
  for (size_t i = 0; i < history.size(); ++i) {
    Var term = ops::scale(t, ops::masked_l1(t, history[i], gt, mask), T(w[i]));
    total = i == 0 ? term : ops::add(t, total, term);
  }
  return total;
}

struct MetricsRecord {
  double gt1 = 0, gt3 = 0, gt5 = 0;  // percent of pixels with error > K
  double mae = 0, rms = 0;           // full-index units
  int64_t count = 0;                 // valid pixels
};

/// Index-error metrics over the valid mask.
template <typename T>
MetricsRecord metrics(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<uint8_t>& mask) {
  if (pred.shape() != gt.shape() || pred.shape() != mask.shape())
    throw InputError("metrics: shape mismatch");
  MetricsRecord r;
  double se = 0, ae = 0;
  int64_t n1 = 0, n3 = 0, n5 = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    if (!mask[i]) continue;
    double e = std::abs(static_cast<double>(pred[i]) - static_cast<double>(gt[i]));
    ae += e;
    se += e * e;
    n1 += e > 1.0;
    n3 += e > 3.0;
    n5 += e > 5.0;
    ++r.count;
  }
  if (r.count == 0) throw InputError("metrics: empty valid mask");
  double n = static_cast<double>(r.count);
  r.gt1 = 100.0 * n1 / n;
  r.gt3 = 100.0 * n3 / n;
  r.gt5 = 100.0 * n5 / n;
  r.mae = ae / n;
  r.rms = std::sqrt(se / n);
  return r;
}

/// Pixel-count-weighted aggregate of per-scene records.
inline MetricsRecord aggregate(const std::vector<MetricsRecord>& rows) {
  if (rows.empty()) throw InputError("aggregate: no records");
  MetricsRecord a;
  double g1 = 0, g3 = 0, g5 = 0, ae = 0, se = 0;
  for (const auto& r : rows) {
    double n = static_cast<double>(r.count);
    g1 += r.gt1 * n;
    g3 += r.gt3 * n;
    g5 += r.gt5 * n;
    ae += r.mae * n;
    se += r.rms * r.rms * n;
    a.count += r.count;
  }
  double n = static_cast<double>(a.count);
  a.gt1 = g1 / n;
  a.gt3 = g3 / n;
  a.gt5 = g5 / n;
  a.mae = ae / n;
  a.rms = std::sqrt(se / n);
  return a;
}

/// Clamp a predicted index map into the representable sweep range; applied
/// to final outputs only, never to mid-iteration estimates.
template <typename T>
Tensor<T> clamp_index(Tensor<T> m, int n_spheres) {
  T hi = static_cast<T>(n_spheres - 1);
  for (int64_t i = 0; i < m.numel(); ++i) m[i] = std::min(std::max(m[i], T(0)), hi);
  return m;
}

}  // namespace romni
