#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "romni/core/rng.hpp"
#include "romni/core/tape.hpp"

namespace romni {

/// Named parameter tensors in declaration order. The order is part of the
/// checkpoint/optimizer contract, so declaration must be deterministic.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  Tensor<T>& add(const std::string& name, std::vector<int64_t> shape) {
    if (index_.count(name)) throw InputError("parameter '" + name + "' declared twice");
    index_[name] = entries_.size();
    entries_.push_back({name, Tensor<T>(shape, T(0))});
    return entries_.back().value;
  }

  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
    return entries_[it->second].value;
  }
  const Tensor<T>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  /// Register every parameter on a tape; returns name -> Var.
  std::map<std::string, Var> leaves(Tape<T>& tape, bool needs_grad) const {
    std::map<std::string, Var> vars;
    for (const auto& e : entries_) vars[e.name] = tape.leaf(e.value, needs_grad);
    return vars;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

using VarMap = std::map<std::string, Var>;

namespace init {

/// He-style normal init with fan-in = product of all but the last axis.
template <typename T>
void he_normal(Tensor<T>& w, Rng& rng) {
  int64_t fan_in = w.numel() / w.dim(w.ndim() - 1);
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal() * std);
}

template <typename T>
void ones(Tensor<T>& w) {
  w.fill(T(1));
}

}  // namespace init

}  // namespace romni
