#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include "romni/core/error.hpp"
#include "romni/core/tensor.hpp"
#include "romni/sweep/sweep.hpp"

namespace romni {

/// Convert a full-resolution inverse-depth index panorama to a point cloud.
/// Pixels below index_floor (near-infinite range) or outside the mask are
/// skipped; with an RGB panorama the cloud is colored. Binary output is
/// little-endian.
inline int64_t export_pointcloud(const Tensor<float>& index_map, const Tensor<uint8_t>& mask,
                                 const SweepConfig& cfg, const Tensor<uint8_t>* rgb,
                                 const std::string& path, bool ascii = false,
                                 double index_floor = 0.5) {
  if (index_map.ndim() != 2) throw InputError("export_pointcloud: index map must be (H, W)");
  int64_t h = index_map.dim(0), w = index_map.dim(1);
  if (mask.numel() != index_map.numel()) throw InputError("export_pointcloud: mask size mismatch");
  if (rgb && (rgb->ndim() != 3 || rgb->dim(0) != h || rgb->dim(1) != w))
    throw InputError("export_pointcloud: rgb panorama shape mismatch");

  double dmax = cfg.d_max();
  int n = cfg.n_spheres;
  auto theta_at = [&](int64_t j) { return -M_PI + (j + 0.5) * 2.0 * M_PI / w; };
  auto phi_at = [&](int64_t k) { return cfg.phi_max - (k + 0.5) * (cfg.phi_max - cfg.phi_min) / h; };

  int64_t count = 0;
  for (int64_t i = 0; i < index_map.numel(); ++i)
    if (mask[i] && index_map[i] >= index_floor) ++count;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for writing");
  f << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  f << "element vertex " << count << "\n";
  f << "property float x\nproperty float y\nproperty float z\n";
  if (rgb) f << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  f << "end_header\n";

  for (int64_t k = 0; k < h; ++k) {
    for (int64_t j = 0; j < w; ++j) {
      int64_t i = k * w + j;
      if (!mask[i] || index_map[i] < index_floor) continue;
      double d = index_map[i] * dmax / (n - 1);
      double range = 1.0 / d;
      Vec3 p = unit_ray(theta_at(j), phi_at(k)) * range;
      if (ascii) {
        f << static_cast<float>(p.x) << " " << static_cast<float>(p.y) << " "
          << static_cast<float>(p.z);
        if (rgb)
          f << " " << int((*rgb)[i * 3]) << " " << int((*rgb)[i * 3 + 1]) << " "
            << int((*rgb)[i * 3 + 2]);
        f << "\n";
      } else {
        float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                        static_cast<float>(p.z)};
        f.write(reinterpret_cast<const char*>(xyz), 12);
        if (rgb) f.write(reinterpret_cast<const char*>(rgb->data() + i * 3), 3);
      }
    }
  }
  if (!f) throw IoError(path, "write failure");
  return count;
}

}  // namespace romni
