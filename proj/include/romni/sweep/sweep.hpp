#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "romni/camera/fisheye.hpp"
#include "romni/core/error.hpp"
#include "romni/core/tensor.hpp"
#include "romni/core/vec3.hpp"

namespace romni {

struct SweepConfig {
  int n_spheres = 192;      // N, full schedule length
  double min_depth = 0.6;   // meters; d_max = 1/min_depth
  int out_width = 640;      // W, full-resolution panorama
  int out_height = 160;     // H
  double phi_min = -M_PI / 4;
  double phi_max = M_PI / 4;

  double d_max() const { return 1.0 / min_depth; }

  void validate() const {
    if (n_spheres < 4 || n_spheres % 2 != 0)
      throw ConfigError("sweep.n_spheres must be even and >= 4");
    if (out_width % 2 != 0 || out_height % 2 != 0 || out_width <= 0 || out_height <= 0)
      throw ConfigError("sweep.out_width/out_height must be positive and even");
    if (!(min_depth > 0)) throw ConfigError("sweep.min_depth must be positive");
    if (!(phi_min < phi_max) || phi_min <= -M_PI / 2 || phi_max >= M_PI / 2)
      throw ConfigError("sweep.phi range must be increasing and inside (-pi/2, pi/2)");
  }
};

/// Panorama ray: azimuth theta in the x-z plane, elevation phi toward +y.
inline Vec3 unit_ray(double theta, double phi) {
  return {std::cos(phi) * std::cos(theta), std::sin(phi), std::cos(phi) * std::sin(theta)};
}

/// d_n = n * d_max / (N-1): uniform in inverse depth, from 0 (infinity)
/// to 1/min_depth.
inline std::vector<double> inverse_depth_schedule(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<double> d(static_cast<size_t>(cfg.n_spheres));
  for (int n = 0; n < cfg.n_spheres; ++n)
    d[static_cast<size_t>(n)] = n * cfg.d_max() / (cfg.n_spheres - 1);
  return d;
}

/// Azimuth of half-resolution column j, pixel-center convention.
inline double sweep_theta(const SweepConfig& cfg, int j) {
  int w2 = cfg.out_width / 2;
  return -M_PI + (j + 0.5) * 2.0 * M_PI / w2;
}

/// Elevation of half-resolution row k; row 0 is the top (phi_max).
inline double sweep_phi(const SweepConfig& cfg, int k) {
  int h2 = cfg.out_height / 2;
  return cfg.phi_max - (k + 0.5) * (cfg.phi_max - cfg.phi_min) / h2;
}

/// Per-camera sampling grids over the (phi, theta, sphere) lattice at half
/// resolution, using every other sphere of the schedule. Coordinates are
/// normalized to [-1, 1] against the source image; invalid cells carry -2.
struct SweepGrids {
  int h2 = 0, w2 = 0, n2 = 0;
  std::vector<Tensor<float>> coords;      // (h2, w2, n2, 2) per camera
  std::vector<Tensor<float>> grid_embed;  // same, -2 where invalid
  std::vector<Tensor<uint8_t>> valid;     // (h2, w2, n2) per camera
  std::vector<double> schedule;           // all N inverse depths

  /// Full-schedule index of sphere slot m.
  int full_index(int m) const { return 2 * m; }
};

inline SweepGrids build_grids(const RigCalibration& rig, const SweepConfig& cfg) {
  rig.validate();
  cfg.validate();
  SweepGrids g;
  g.h2 = cfg.out_height / 2;
  g.w2 = cfg.out_width / 2;
  g.n2 = cfg.n_spheres / 2;
  g.schedule = inverse_depth_schedule(cfg);
  for (const auto& cam : rig.cameras) {
    Tensor<float> coords({g.h2, g.w2, g.n2, 2}, -2.f);
    Tensor<float> embed({g.h2, g.w2, g.n2, 2}, -2.f);
    Tensor<uint8_t> valid({g.h2, g.w2, g.n2}, uint8_t(0));
    for (int k = 0; k < g.h2; ++k) {
      double phi = sweep_phi(cfg, k);
      for (int j = 0; j < g.w2; ++j) {
        Vec3 ray = unit_ray(sweep_theta(cfg, j), phi);
        for (int m = 0; m < g.n2; ++m) {
          double dn = g.schedule[static_cast<size_t>(2 * m)];
          Projection p = dn == 0.0 ? cam.project(ray, /*at_infinity=*/true)
                                   : cam.project(ray / dn);
          if (!p.valid) continue;
          float xn = static_cast<float>(2.0 * p.u / (cam.width - 1) - 1.0);
          float yn = static_cast<float>(2.0 * p.v / (cam.height - 1) - 1.0);
          coords.at(k, j, m, 0) = xn;
          coords.at(k, j, m, 1) = yn;
          embed.at(k, j, m, 0) = xn;
          embed.at(k, j, m, 1) = yn;
          valid.at(k, j, m) = 1;
        }
      }
    }
    g.coords.push_back(std::move(coords));
    g.grid_embed.push_back(std::move(embed));
    g.valid.push_back(std::move(valid));
  }
  return g;
}

/// Fraction of cells covered by the union of the given cameras' masks.
inline double coverage_fraction(const SweepGrids& g, std::vector<int> cams) {
  int64_t total = static_cast<int64_t>(g.h2) * g.w2 * g.n2;
  int64_t covered = 0;
  for (int64_t i = 0; i < total; ++i) {
    bool any = false;
    for (int c : cams) any = any || g.valid[static_cast<size_t>(c)][i];
    covered += any;
  }
  return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace romni
