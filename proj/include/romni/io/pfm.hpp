#pragma once

#include <fstream>
#include <string>

#include "romni/core/error.hpp"
#include "romni/core/tensor.hpp"

namespace romni {

/// Grayscale PFM ("Pf"), little-endian (scale -1.0), rows stored
/// bottom-to-top per the format convention. Input tensor is (H, W), row 0
/// at the top.
inline void save_pfm(const Tensor<float>& map, const std::string& path) {
  if (map.ndim() != 2) throw InputError("save_pfm: expected an (H, W) map");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for writing");
  int64_t h = map.dim(0), w = map.dim(1);
  f << "Pf\n" << w << " " << h << "\n-1.0\n";
  for (int64_t r = h - 1; r >= 0; --r)
    f.write(reinterpret_cast<const char*>(map.data() + r * w),
            static_cast<std::streamsize>(w * sizeof(float)));
  if (!f) throw IoError(path, "write failure");
}

inline Tensor<float> load_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open");
  std::string tag;
  int64_t w = 0, h = 0;
  double scale = 0;
  f >> tag >> w >> h >> scale;
  if (tag != "Pf") throw IoError(path, "not a grayscale PFM");
  if (w <= 0 || h <= 0) throw IoError(path, "bad dimensions");
  if (scale > 0) throw IoError(path, "big-endian PFM not supported");
  f.get();  // single whitespace after the header
  Tensor<float> map({h, w});
  for (int64_t r = h - 1; r >= 0; --r)
    f.read(reinterpret_cast<char*>(map.data() + r * w),
           static_cast<std::streamsize>(w * sizeof(float)));
  if (!f) throw IoError(path, "truncated pixel data");
  return map;
}

}  // namespace romni
