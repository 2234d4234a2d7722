#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "romni/core/tape.hpp"

namespace romni::ops {

// ---- elementwise -----------------------------------------------------------

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  check_same_shape(va, vb, "add");
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] + vb[i];
  bool ng = t.any_needs_grad({a, b});
  return t.push(std::move(out), ng, [a, b](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    if (tp.needs_grad(a)) {
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      auto& gb = tp.grad(b);
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
    }
  });
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  check_same_shape(va, vb, "sub");
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] - vb[i];
  bool ng = t.any_needs_grad({a, b});
  return t.push(std::move(out), ng, [a, b](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    if (tp.needs_grad(a)) {
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(b)) {
      auto& gb = tp.grad(b);
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  check_same_shape(va, vb, "mul");
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * vb[i];
  bool ng = t.any_needs_grad({a, b});
  return t.push(std::move(out), ng, [a, b](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& va2 = tp.val(a);
    const auto& vb2 = tp.val(b);
    if (tp.needs_grad(a)) {
      auto& ga = tp.grad(a);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb2[i];
    }
    if (tp.needs_grad(b)) {
      auto& gb = tp.grad(b);
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va2[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T s) {
  const auto& va = t.val(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * s;
  return t.push(std::move(out), t.needs_grad(a), [a, s](Tape<T>& tp, int self) {
    if (!tp.needs_grad(a)) return;
    const auto& g = tp.grad(Var{self});
    auto& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * s;
  });
}

template <typename T>
Var add_scalar(Tape<T>& t, Var a, T c) {
  const auto& va = t.val(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] + c;
  return t.push(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, int self) {
    if (!tp.needs_grad(a)) return;
    const auto& g = tp.grad(Var{self});
    auto& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

/// 1 - a.
template <typename T>
Var one_minus(Tape<T>& t, Var a) {
  return add_scalar(t, scale(t, a, T(-1)), T(1));
}

template <typename T>
Var relu(Tape<T>& t, Var a) {
  const auto& va = t.val(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] > T(0) ? va[i] : T(0);
  return t.push(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, int self) {
    if (!tp.needs_grad(a)) return;
    const auto& g = tp.grad(Var{self});
    const auto& va2 = tp.val(a);
    auto& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i)
      if (va2[i] > T(0)) ga[i] += g[i];
  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var a) {
  const auto& va = t.val(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-va[i]));
  return t.push(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, int self) {
    if (!tp.needs_grad(a)) return;
    const auto& g = tp.grad(Var{self});
    const auto& y = tp.val(Var{self});
    auto& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var tanh_(Tape<T>& t, Var a) {
  const auto& va = t.val(a);
  Tensor<T> out(va.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(va[i]);
  return t.push(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, int self) {
    if (!tp.needs_grad(a)) return;
    const auto& g = tp.grad(Var{self});
    const auto& y = tp.val(Var{self});
    auto& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

// ---- structure -------------------------------------------------------------

/// Concatenate along the last axis. All inputs share leading dimensions.
template <typename T>
Var concat_last(Tape<T>& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw InputError("concat_last: no inputs");
  const auto& first = t.val(parts[0]);
  std::vector<int64_t> shape = first.shape();
  int last = first.ndim() - 1;
  int64_t rows = first.numel() / first.dim(last);
  int64_t total_c = 0;
  std::vector<int64_t> widths;
  for (Var p : parts) {
    const auto& v = t.val(p);
    if (v.ndim() != first.ndim()) throw InputError("concat_last: rank mismatch");
    for (int i = 0; i < last; ++i)
      if (v.dim(i) != first.dim(i)) throw InputError("concat_last: leading shape mismatch");
    widths.push_back(v.dim(last));
    total_c += v.dim(last);
  }
  shape[static_cast<size_t>(last)] = total_c;
  Tensor<T> out(shape);
  {
    int64_t off = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
      const auto& v = t.val(parts[k]);
      int64_t w = widths[k];
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < w; ++c) out[r * total_c + off + c] = v[r * w + c];
      off += w;
    }
  }
  bool ng = false;
  for (Var p : parts) ng = ng || t.needs_grad(p);
  std::vector<Var> ps(parts);
  return t.push(std::move(out), ng, [ps, widths, rows, total_c](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    int64_t off = 0;
    for (size_t k = 0; k < ps.size(); ++k) {
      int64_t w = widths[k];
      if (tp.needs_grad(ps[k])) {
        auto& gp = tp.grad(ps[k]);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < w; ++c) gp[r * w + c] += g[r * total_c + off + c];
      }
      off += w;
    }
  });
}

/// Reinterpret with a new shape of equal element count (copies).
template <typename T>
Var reshape(Tape<T>& t, Var a, std::vector<int64_t> shape) {
  const auto& va = t.val(a);
  Tensor<T> out(shape);
  if (out.numel() != va.numel()) throw InputError("reshape: element count mismatch");
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i];
  return t.push(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, int self) {
    if (!tp.needs_grad(a)) return;
    const auto& g = tp.grad(Var{self});
    auto& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

/// Per-cell linear layer on the last axis: (..., Cin) x (Cin, Cout) + b.
template <typename T>
Var linear_cells(Tape<T>& t, Var x, Var w, Var b) {
  const auto& vx = t.val(x);
  const auto& vw = t.val(w);
  const auto& vb = t.val(b);
  if (vw.ndim() != 2) throw InputError("linear_cells: weight must be 2-d");
  int64_t cin = vw.dim(0), cout = vw.dim(1);
  if (vx.dim(vx.ndim() - 1) != cin)
    throw InputError("linear_cells: input channels " + vx.shape_str() + " vs weight " + vw.shape_str());
  if (vb.numel() != cout) throw InputError("linear_cells: bias size mismatch");
  int64_t rows = vx.numel() / cin;
  std::vector<int64_t> shape = vx.shape();
  shape.back() = cout;
  Tensor<T> out(shape);
  const T* xp = vx.data();
  const T* wp = vw.data();
  const T* bp = vb.data();
  T* op = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    T* orow = op + r * cout;
    for (int64_t co = 0; co < cout; ++co) orow[co] = bp[co];
    const T* xrow = xp + r * cin;
    for (int64_t ci = 0; ci < cin; ++ci) {
      T a = xrow[ci];
      const T* wrow = wp + ci * cout;
      for (int64_t co = 0; co < cout; ++co) orow[co] += a * wrow[co];
    }
  }
  bool ng = t.any_needs_grad({x, w, b});
  return t.push(std::move(out), ng, [x, w, b, rows, cin, cout](Tape<T>& tp, int self) {
    const auto& g = tp.grad(Var{self});
    const auto& vx2 = tp.val(x);
    const auto& vw2 = tp.val(w);
    const T* gp = g.data();
    if (tp.needs_grad(x)) {
      auto& gx = tp.grad(x);
      T* gxp = gx.data();
      const T* wp2 = vw2.data();
      for (int64_t r = 0; r < rows; ++r) {
        const T* grow = gp + r * cout;
        T* gxrow = gxp + r * cin;
        for (int64_t ci = 0; ci < cin; ++ci) {
          const T* wrow = wp2 + ci * cout;
          T s = T(0);
          for (int64_t co = 0; co < cout; ++co) s += grow[co] * wrow[co];
          gxrow[ci] += s;
        }
      }
    }
    if (tp.needs_grad(w)) {
      auto& gw = tp.grad(w);
      T* gwp = gw.data();
      const T* xp2 = vx2.data();
      for (int64_t r = 0; r < rows; ++r) {
        const T* grow = gp + r * cout;
        const T* xrow = xp2 + r * cin;
        for (int64_t ci = 0; ci < cin; ++ci) {
          T a = xrow[ci];
          T* gwrow = gwp + ci * cout;
          for (int64_t co = 0; co < cout; ++co) gwrow[co] += a * grow[co];
        }
      }
    }
    if (tp.needs_grad(b)) {
      auto& gb = tp.grad(b);
      T* gbp = gb.data();
      for (int64_t r = 0; r < rows; ++r) {
        const T* grow = gp + r * cout;
        for (int64_t co = 0; co < cout; ++co) gbp[co] += grow[co];
      }
    }
  });
}

/// Softmax over the last axis.
template <typename T>
Var softmax_last(Tape<T>& t, Var x) {
  const auto& vx = t.val(x);
  int64_t c = vx.dim(vx.ndim() - 1);
  int64_t rows = vx.numel() / c;
  Tensor<T> out(vx.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const T* xi = vx.data() + r * c;
    T* oi = out.data() + r * c;
    T mx = xi[0];
    for (int64_t i = 1; i < c; ++i) mx = std::max(mx, xi[i]);
    T sum = T(0);
    for (int64_t i = 0; i < c; ++i) {
      oi[i] = std::exp(xi[i] - mx);
      sum += oi[i];
    }
    for (int64_t i = 0; i < c; ++i) oi[i] /= sum;
  }
  return t.push(std::move(out), t.needs_grad(x), [x, rows, c](Tape<T>& tp, int self) {
    if (!tp.needs_grad(x)) return;
    const auto& g = tp.grad(Var{self});
    const auto& y = tp.val(Var{self});
    auto& gx = tp.grad(x);
    for (int64_t r = 0; r < rows; ++r) {
      const T* gi = g.data() + r * c;
      const T* yi = y.data() + r * c;
      T* gxi = gx.data() + r * c;
      T dot = T(0);
      for (int64_t i = 0; i < c; ++i) dot += gi[i] * yi[i];
      for (int64_t i = 0; i < c; ++i) gxi[i] += yi[i] * (gi[i] - dot);
    }
  });
}

template <typename T>
Var sum_all(Tape<T>& t, Var a) {
  const auto& va = t.val(a);
  T s = T(0);
  for (int64_t i = 0; i < va.numel(); ++i) s += va[i];
  Tensor<T> out({1});
  out[0] = s;
  return t.push(std::move(out), t.needs_grad(a), [a](Tape<T>& tp, int self) {
    if (!tp.needs_grad(a)) return;
    T g = tp.grad(Var{self})[0];
    auto& ga = tp.grad(a);
    for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

/// Mean of |pred - target| over cells where mask != 0. Target and mask are
/// constants.
template <typename T>
Var masked_l1(Tape<T>& t, Var pred, const Tensor<T>& target, const Tensor<uint8_t>& mask) {
  const auto& vp = t.val(pred);
  check_same_shape(vp, target, "masked_l1");
  if (mask.numel() != vp.numel()) throw InputError("masked_l1: mask size mismatch");
  int64_t count = 0;
  T s = T(0);
  for (int64_t i = 0; i < vp.numel(); ++i) {
    if (!mask[i]) continue;
    s += std::abs(vp[i] - target[i]);
    ++count;
  }
  if (count == 0) throw InputError("masked_l1: empty mask");
  Tensor<T> out({1});
  out[0] = s / static_cast<T>(count);
  // capture target by value: cheap relative to volumes, keeps the op pure
  Tensor<T> tgt = target;
  Tensor<uint8_t> msk = mask;
  return t.push(std::move(out), t.needs_grad(pred),
                [pred, tgt = std::move(tgt), msk = std::move(msk), count](Tape<T>& tp, int self) {
                  if (!tp.needs_grad(pred)) return;
                  T g = tp.grad(Var{self})[0] / static_cast<T>(count);
                  const auto& vp2 = tp.val(pred);
                  auto& gp = tp.grad(pred);
                  for (int64_t i = 0; i < vp2.numel(); ++i) {
                    if (!msk[i]) continue;
                    T d = vp2[i] - tgt[i];
                    if (d > T(0))
                      gp[i] += g;
                    else if (d < T(0))
                      gp[i] -= g;
                  }
                });
}

}  // namespace romni::ops
