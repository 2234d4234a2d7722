#pragma once

#include <png.h>

#include <cstdio>
#include <string>
#include <vector>

#include "romni/core/error.hpp"
#include "romni/core/tensor.hpp"

namespace romni {

/// Write an 8-bit PNG. Accepts (H, W) gray or (H, W, 3) RGB tensors.
/// Compression settings are pinned so repeated runs produce identical bytes.
inline void save_png(const Tensor<uint8_t>& img, const std::string& path) {
  int channels;
  if (img.ndim() == 2)
    channels = 1;
  else if (img.ndim() == 3 && img.dim(2) == 3)
    channels = 3;
  else
    throw InputError("save_png: expected (H, W) or (H, W, 3), got " + img.shape_str());
  int64_t h = img.dim(0), w = img.dim(1);

  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError(path, "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError(path, "libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError(path, "libpng write failure");
  }
  png_init_io(png, fp);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int64_t r = 0; r < h; ++r)
    rows[static_cast<size_t>(r)] = const_cast<png_bytep>(img.data() + r * w * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

/// Read an 8-bit PNG; returns (H, W, 3) RGB (gray and palette expanded,
/// alpha stripped).
inline Tensor<uint8_t> load_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError(path, "cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path, "libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError(path, "libpng read failure");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  int64_t w = png_get_image_width(png, info);
  int64_t h = png_get_image_height(png, info);
  Tensor<uint8_t> img({h, w, 3});
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int64_t r = 0; r < h; ++r) rows[static_cast<size_t>(r)] = img.data() + r * w * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

}  // namespace romni
