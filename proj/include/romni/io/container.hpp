#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "romni/core/error.hpp"
#include "romni/core/tensor.hpp"

namespace romni {

/// Little-endian named-array container, used for grid caches and
/// checkpoints. Layout: 8-byte magic "RSGRID1\0", u32 array count, then per
/// array: u32 name length, name bytes, u8 dtype, u32 ndim, i64 dims, raw
/// data. Arrays are written in lexicographic name order so files are
/// byte-stable.
class ArrayStore {
 public:
  std::map<std::string, Tensor<float>> f32;
  std::map<std::string, Tensor<double>> f64;
  std::map<std::string, Tensor<uint8_t>> u8;

  void put_text(const std::string& name, const std::string& text) {
    Tensor<uint8_t> t({static_cast<int64_t>(text.size())});
    std::memcpy(t.data(), text.data(), text.size());
    u8[name] = std::move(t);
  }

  std::string text(const std::string& name) const {
    auto it = u8.find(name);
    if (it == u8.end()) throw IoError(name, "text entry not found in container");
    return std::string(reinterpret_cast<const char*>(it->second.data()),
                       static_cast<size_t>(it->second.numel()));
  }

  bool has(const std::string& name) const {
    return f32.count(name) || f64.count(name) || u8.count(name);
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(path, "cannot open for writing");
    f.write(kMagic, 8);
    // dtype tag per name, sorted by name across all maps
    std::vector<std::pair<std::string, uint8_t>> entries;
    for (const auto& [n, _] : f32) entries.emplace_back(n, 0);
    for (const auto& [n, _] : f64) entries.emplace_back(n, 1);
    for (const auto& [n, _] : u8) entries.emplace_back(n, 2);
    std::sort(entries.begin(), entries.end());
    write_u32(f, static_cast<uint32_t>(entries.size()));
    for (const auto& [name, dtype] : entries) {
      write_u32(f, static_cast<uint32_t>(name.size()));
      f.write(name.data(), static_cast<std::streamsize>(name.size()));
      f.put(static_cast<char>(dtype));
      switch (dtype) {
        case 0: write_array(f, f32.at(name)); break;
        case 1: write_array(f, f64.at(name)); break;
        case 2: write_array(f, u8.at(name)); break;
      }
    }
    if (!f) throw IoError(path, "write failure");
  }

  static ArrayStore load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path, "cannot open");
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) throw IoError(path, "bad magic");
    ArrayStore s;
    uint32_t count = read_u32(f, path);
    for (uint32_t i = 0; i < count; ++i) {
      uint32_t len = read_u32(f, path);
      std::string name(len, '\0');
      f.read(name.data(), len);
      int dtype = f.get();
      uint32_t ndim = read_u32(f, path);
      std::vector<int64_t> dims(ndim);
      for (auto& d : dims) {
        f.read(reinterpret_cast<char*>(&d), 8);
      }
      if (!f) throw IoError(path, "truncated header");
      switch (dtype) {
        case 0: s.f32[name] = read_data<float>(f, dims, path); break;
        case 1: s.f64[name] = read_data<double>(f, dims, path); break;
        case 2: s.u8[name] = read_data<uint8_t>(f, dims, path); break;
        default: throw IoError(path, "unknown dtype tag " + std::to_string(dtype));
      }
    }
    return s;
  }

 private:
  static constexpr const char kMagic[9] = "RSGRID1";  // 7 chars + NUL, 8 bytes written

  static void write_u32(std::ofstream& f, uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  static uint32_t read_u32(std::ifstream& f, const std::string& path) {
    uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw IoError(path, "truncated file");
    return v;
  }
  template <typename T>
  static void write_array(std::ofstream& f, const Tensor<T>& t) {
    write_u32(f, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) {
      int64_t d = t.dim(i);
      f.write(reinterpret_cast<const char*>(&d), 8);
    }
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(T))));
  }
  template <typename T>
  static Tensor<T> read_data(std::ifstream& f, const std::vector<int64_t>& dims,
                             const std::string& path) {
    Tensor<T> t(dims);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(T))));
    if (!f) throw IoError(path, "truncated array data");
    return t;
  }
};

}  // namespace romni
