#pragma once

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "romni/core/error.hpp"

namespace romni {

/// Dense row-major n-dimensional array. The single data container used
/// throughout: images, feature maps, volumes, network weights.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape, T fill = T(0))
      : shape_(std::move(shape)) {
    init_strides();
    data_.assign(static_cast<size_t>(numel_), fill);
  }

  Tensor(std::initializer_list<int64_t> shape, T fill = T(0))
      : Tensor(std::vector<int64_t>(shape), fill) {}

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, T v) { return Tensor(std::move(shape), v); }

  const std::vector<int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return numel_; }
  bool empty() const { return numel_ == 0; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T* begin() { return data_.data(); }
  T* end() { return data_.data() + data_.size(); }
  const T* begin() const { return data_.data(); }
  const T* end() const { return data_.data() + data_.size(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  template <typename... Ix>
  T& at(Ix... ix) {
    return data_[static_cast<size_t>(offset(ix...))];
  }
  template <typename... Ix>
  const T& at(Ix... ix) const {
    return data_[static_cast<size_t>(offset(ix...))];
  }

  template <typename... Ix>
  int64_t offset(Ix... ix) const {
    const int64_t idx[] = {static_cast<int64_t>(ix)...};
    int64_t off = 0;
    for (size_t i = 0; i < sizeof...(ix); ++i) off += idx[i] * strides_[i];
    return off;
  }

  int64_t stride(int i) const { return strides_[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(T v) { data_.assign(data_.size(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel_; ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

 private:
  void init_strides() {
    strides_.assign(shape_.size(), 1);
    numel_ = shape_.empty() ? 0 : 1;
    for (int i = static_cast<int>(shape_.size()) - 1; i >= 0; --i) {
      strides_[static_cast<size_t>(i)] = numel_ == 0 ? 1 : (i + 1 < ndim() ? strides_[static_cast<size_t>(i) + 1] * shape_[static_cast<size_t>(i) + 1] : 1);
      if (shape_[static_cast<size_t>(i)] < 0) throw InputError("negative tensor dimension");
    }
    numel_ = 1;
    for (int64_t d : shape_) numel_ *= d;
  }

  std::vector<int64_t> shape_;
  std::vector<int64_t> strides_;
  int64_t numel_ = 0;
  std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
  if (!a.same_shape(b))
    throw InputError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace romni
