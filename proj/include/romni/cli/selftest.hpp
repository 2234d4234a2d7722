#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "romni/cli/config.hpp"
#include "romni/io/container.hpp"
#include "romni/io/pfm.hpp"
#include "romni/net/update.hpp"
#include "romni/sweep/sweep.hpp"
#include "romni/train/loss.hpp"

namespace romni {

namespace selftest {

inline bool grid_oracle() {
  auto rig = make_default_rig(96, 0.4, 220.0);
  SweepConfig cfg;
  cfg.n_spheres = 16;
  cfg.out_width = 64;
  cfg.out_height = 32;
  auto g = build_grids(rig, cfg);
  double dmax = cfg.d_max();
  for (int cam = 0; cam < 4; ++cam) {
    const auto& c = rig.cameras[static_cast<size_t>(cam)];
    for (int k = 0; k < g.h2; ++k)
      for (int j = 0; j < g.w2; ++j)
        for (int m = 0; m < g.n2; ++m) {
          double theta = -M_PI + (j + 0.5) * 2.0 * M_PI / g.w2;
          double phi = cfg.phi_max - (k + 0.5) * (cfg.phi_max - cfg.phi_min) / g.h2;
          Vec3 ray = unit_ray(theta, phi);
          double dn = (2 * m) * dmax / (cfg.n_spheres - 1);
          Projection p = dn == 0 ? c.project(ray, true) : c.project(ray * (1.0 / dn));
          if (p.valid != (g.valid[static_cast<size_t>(cam)].at(k, j, m) != 0)) return false;
          if (!p.valid) continue;
          double xn = 2.0 * p.u / (c.width - 1) - 1.0;
          double yn = 2.0 * p.v / (c.height - 1) - 1.0;
          if (std::abs(g.coords[static_cast<size_t>(cam)].at(k, j, m, 0) - xn) > 1e-6) return false;
          if (std::abs(g.coords[static_cast<size_t>(cam)].at(k, j, m, 1) - yn) > 1e-6) return false;
        }
  }
  return true;
}

inline bool opposite_coverage() {
  auto rig = make_default_rig(96, 0.4, 220.0);
  SweepConfig cfg;
  cfg.n_spheres = 16;
  cfg.out_width = 64;
  cfg.out_height = 32;
  auto g = build_grids(rig, cfg);
  return coverage_fraction(g, {0, 2}) == 1.0 && coverage_fraction(g, {1, 3}) == 1.0;
}

inline bool loss_weight_exactness() {
  auto w = loss_weights(12, 0.9);
  if (w.size() != 12 || w.back() != 1.0) return false;
  for (int i = 0; i < 12; ++i)
    if (std::abs(w[static_cast<size_t>(i)] - std::pow(0.9, 11 - i)) > 1e-12) return false;
  return true;
}

inline bool lookup_channels() {
  Tape<float> t;
  Tensor<float> corr({2, 2, 16}, 0.5f);
  auto pyr = build_pyramid(t, t.leaf(corr));
  Var out = lookup(t, pyr, t.leaf(Tensor<float>({2, 2}, 3.0f)), 4);
  return t.val(out).dim(2) == 36;
}

inline bool upsample_partition_of_unity() {
  Rng rng(5);
  Tape<float> t;
  Tensor<float> logits({3, 4, 2, 2, 9});
  for (int64_t i = 0; i < logits.numel(); ++i)
    logits[i] = static_cast<float>(rng.uniform(-2, 2));
  Var up = convex_upsample(t, t.leaf(Tensor<float>({3, 4}, 0.7f)), t.leaf(logits));
  for (int64_t i = 0; i < t.val(up).numel(); ++i)
    if (std::abs(t.val(up)[i] - 1.4f) > 1e-6f) return false;
  return true;
}

inline bool metrics_oracle() {
  Rng rng(6);
  Tensor<float> pred({10, 10}), gt({10, 10});
  Tensor<uint8_t> mask({10, 10});
  for (int64_t i = 0; i < 100; ++i) {
    pred[i] = static_cast<float>(rng.uniform(0, 8));
    gt[i] = static_cast<float>(rng.uniform(0, 8));
    mask[i] = rng.uniform() < 0.8 ? 1 : 0;
  }
  mask[0] = 1;
  MetricsRecord r = metrics(pred, gt, mask);
  double ae = 0, se = 0;
  int64_t n = 0, n1 = 0;
  for (int64_t i = 0; i < 100; ++i) {
    if (!mask[i]) continue;
    double e = std::abs(double(pred[i]) - double(gt[i]));
    ae += e;
    se += e * e;
    n1 += e > 1;
    ++n;
  }
  if (std::abs(r.mae - ae / n) > 1e-9) return false;
  if (std::abs(r.rms - std::sqrt(se / n)) > 1e-9) return false;
  if (std::abs(r.gt1 - 100.0 * n1 / n) > 1e-9) return false;
  return r.gt5 <= r.gt3 && r.gt3 <= r.gt1 && r.rms >= r.mae;
}

inline bool container_round_trip() {
  namespace fs = std::filesystem;
  std::string path = (fs::temp_directory_path() / "romni_selftest.rsg").string();
  ArrayStore s;
  Rng rng(7);
  Tensor<float> a({3, 4});
  for (int64_t i = 0; i < a.numel(); ++i) a[i] = static_cast<float>(rng.normal());
  s.f32["a"] = a;
  s.put_text("note", "hello");
  s.save(path);
  ArrayStore r = ArrayStore::load(path);
  bool ok = r.text("note") == "hello" && r.f32.at("a").same_shape(a);
  for (int64_t i = 0; ok && i < a.numel(); ++i) ok = r.f32.at("a")[i] == a[i];
  fs::remove(path);
  return ok;
}

inline bool pfm_round_trip() {
  namespace fs = std::filesystem;
  std::string path = (fs::temp_directory_path() / "romni_selftest.pfm").string();
  Rng rng(8);
  Tensor<float> m({4, 6});
  for (int64_t i = 0; i < m.numel(); ++i) m[i] = static_cast<float>(rng.uniform(-3, 3));
  save_pfm(m, path);
  Tensor<float> r = load_pfm(path);
  bool ok = r.same_shape(m);
  for (int64_t i = 0; ok && i < m.numel(); ++i) ok = r[i] == m[i];
  fs::remove(path);
  return ok;
}

inline bool rng_determinism() {
  Rng a(123), b(123);
  for (int i = 0; i < 64; ++i)
    if (a.uniform() != b.uniform()) return false;
  return true;
}

inline bool config_round_trip() {
  RunConfig c;
  c.steps = 777;
  c.fusion = "all";
  auto j = config_to_json(c);
  RunConfig back = config_from_json(j);
  return config_to_json(back) == j;
}

}  // namespace selftest

/// Fast oracle/invariant suite behind `romnisweep self-test`. Returns
/// (name, passed) per check.
inline std::vector<std::pair<std::string, bool>> run_self_tests() {
  using namespace selftest;
  std::vector<std::pair<std::string, bool>> out;
  auto run = [&](const std::string& name, bool (*fn)()) {
    bool ok = false;
    try {
      ok = fn();
    } catch (...) {
      ok = false;
    }
    out.emplace_back(name, ok);
  };
  run("grid-oracle", grid_oracle);
  run("opposite-coverage", opposite_coverage);
  run("loss-weights", loss_weight_exactness);
  run("lookup-channels", lookup_channels);
  run("upsample-partition-of-unity", upsample_partition_of_unity);
  run("metrics-oracle", metrics_oracle);
  run("container-round-trip", container_round_trip);
  run("pfm-round-trip", pfm_round_trip);
  run("rng-determinism", rng_determinism);
  run("config-round-trip", config_round_trip);
  return out;
}

}  // namespace romni
