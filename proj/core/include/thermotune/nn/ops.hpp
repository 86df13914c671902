#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "thermotune/nn/autograd.hpp"

namespace thermotune::nn {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

inline void require_same(const Shape& a, const Shape& b, const char* op) {
  require(a == b, std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) + " differ");
}

template <typename T>
Tensor<T>* grad_of(Node<T>& self, std::size_t k) {
  auto& p = *self.parents[k];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

template <typename T, typename F, typename G>
Var<T> unary(const Var<T>& x, F f, G dfdx_from_xy) {
  Tensor<T> y(x.shape());
  const auto& xv = x.value();
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = f(xv[k]);
  return make_result<T>(std::move(y), {x}, [dfdx_from_xy](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xv = self.parents[0]->value;
    for (std::size_t k = 0; k < gx->size(); ++k) {
      (*gx)[k] += self.grad[k] * dfdx_from_xy(xv[k], self.value[k]);
    }
  });
}

}  // namespace detail

template <typename T>
Var<T> constant(Tensor<T> value) {
  return Var<T>(std::move(value), false);
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  return Var<T>(std::move(value), true);
}

template <typename T>
Var<T> detach(const Var<T>& x) {
  return Var<T>(x.value(), false);
}

/// y = x·Wᵀ + b for x [B, in], W [out, in], b [out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  using namespace detail;
  require(x.value().rank() == 2 && w.value().rank() == 2 && b.value().rank() == 1,
          "linear: expected x [B,in], W [out,in], b [out]");
  const int batch = x.value().dim(0), in = x.value().dim(1);
  const int out = w.value().dim(0);
  require(w.value().dim(1) == in && b.value().dim(0) == out,
          "linear: W " + to_string(w.shape()) + " incompatible with x " + to_string(x.shape()));
  Tensor<T> y({batch, out});
  MatMap<T> ym(y.data(), batch, out);
  ym.noalias() = ConstMatMap<T>(x.value().data(), batch, in) *
                 ConstMatMap<T>(w.value().data(), out, in).transpose();
  ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().data(), out);
  return make_result<T>(std::move(y), {x, w, b}, [batch, in, out](Node<T>& self) {
    ConstMatMap<T> gy(self.grad.data(), batch, out);
    if (auto* gx = grad_of(self, 0)) {
      MatMap<T>(gx->data(), batch, in).noalias() +=
          gy * ConstMatMap<T>(self.parents[1]->value.data(), out, in);
    }
    if (auto* gw = grad_of(self, 1)) {
      MatMap<T>(gw->data(), out, in).noalias() +=
          gy.transpose() * ConstMatMap<T>(self.parents[0]->value.data(), batch, in);
    }
    if (auto* gb = grad_of(self, 2)) {
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(gb->data(), out) += gy.colwise().sum();
    }
  });
}

/// y = x·Wᵀ for x [B, in], W [out, in].
template <typename T>
Var<T> matmul_bt(const Var<T>& x, const Var<T>& w) {
  using namespace detail;
  require(x.value().rank() == 2 && w.value().rank() == 2 && x.value().dim(1) == w.value().dim(1),
          "matmul_bt: incompatible " + to_string(x.shape()) + " and " + to_string(w.shape()));
  const int batch = x.value().dim(0), in = x.value().dim(1), out = w.value().dim(0);
  Tensor<T> y({batch, out});
  MatMap<T>(y.data(), batch, out).noalias() =
      ConstMatMap<T>(x.value().data(), batch, in) *
      ConstMatMap<T>(w.value().data(), out, in).transpose();
  return make_result<T>(std::move(y), {x, w}, [batch, in, out](Node<T>& self) {
    ConstMatMap<T> gy(self.grad.data(), batch, out);
    if (auto* gx = grad_of(self, 0)) {
      MatMap<T>(gx->data(), batch, in).noalias() +=
          gy * ConstMatMap<T>(self.parents[1]->value.data(), out, in);
    }
    if (auto* gw = grad_of(self, 1)) {
      MatMap<T>(gw->data(), out, in).noalias() +=
          gy.transpose() * ConstMatMap<T>(self.parents[0]->value.data(), batch, in);
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "add");
  Tensor<T> y(a.shape());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = a.value()[k] + b.value()[k];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* g = detail::grad_of(self, p)) {
        for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k];
      }
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "sub");
  Tensor<T> y(a.shape());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = a.value()[k] - b.value()[k];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k];
    }
    if (auto* g = detail::grad_of(self, 1)) {
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] -= self.grad[k];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "mul");
  Tensor<T> y(a.shape());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = a.value()[k] * b.value()[k];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k] * bv[k];
    }
    if (auto* g = detail::grad_of(self, 1)) {
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k] * av[k];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  return detail::unary(x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return detail::unary(x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return detail::unary(x, [](T v) { return v > T(0) ? v : T(0); },
                       [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
                       [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  return detail::unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  return detail::unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  return detail::unary(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

/// Gradient passes only where lo < x < hi.
template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  return detail::unary(x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
                       [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

/// Elementwise minimum; ties route the gradient to `a`.
template <typename T>
Var<T> minimum(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "minimum");
  Tensor<T> y(a.shape());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::min(a.value()[k], b.value()[k]);
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    auto* ga = detail::grad_of(self, 0);
    auto* gb = detail::grad_of(self, 1);
    for (std::size_t k = 0; k < self.grad.size(); ++k) {
      if (av[k] <= bv[k]) {
        if (ga) (*ga)[k] += self.grad[k];
      } else if (gb) {
        (*gb)[k] += self.grad[k];
      }
    }
  });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> y = x.value().reshaped(std::move(shape));
  return make_result<T>(std::move(y), {x}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[k];
    }
  });
}

/// Concatenates [B, k_i] blocks along the feature axis.
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  const int batch = parts.front().value().dim(0);
  std::vector<int> widths;
  int total = 0;
  for (const auto& p : parts) {
    detail::require(p.value().rank() == 2 && p.value().dim(0) == batch,
                    "concat_cols: expected [B,k] inputs with equal B, got " + to_string(p.shape()));
    widths.push_back(p.value().dim(1));
    total += widths.back();
  }
  Tensor<T> y({batch, total});
  int offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].value();
    for (int b = 0; b < batch; ++b) {
      std::copy_n(v.data() + static_cast<std::size_t>(b) * widths[p], widths[p],
                  y.data() + static_cast<std::size_t>(b) * total + offset);
    }
    offset += widths[p];
  }
  return make_result<T>(std::move(y), parts, [widths, batch, total](Node<T>& self) {
    int offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (auto* g = detail::grad_of(self, p)) {
        for (int b = 0; b < batch; ++b) {
          for (int j = 0; j < widths[p]; ++j) {
            (*g)[static_cast<std::size_t>(b) * widths[p] + j] +=
                self.grad[static_cast<std::size_t>(b) * total + offset + j];
          }
        }
      }
      offset += widths[p];
    }
  });
}

/// Columns [start, start+len) of x [B, K].
template <typename T>
Var<T> slice_cols(const Var<T>& x, int start, int len) {
  detail::require(x.value().rank() == 2 && start >= 0 && len >= 0 && start + len <= x.value().dim(1),
                  "slice_cols: range out of bounds for " + to_string(x.shape()));
  const int batch = x.value().dim(0), width = x.value().dim(1);
  Tensor<T> y({batch, len});
  for (int b = 0; b < batch; ++b) {
    std::copy_n(x.value().data() + static_cast<std::size_t>(b) * width + start, len,
                y.data() + static_cast<std::size_t>(b) * len);
  }
  return make_result<T>(std::move(y), {x}, [batch, width, start, len](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (int b = 0; b < batch; ++b) {
        for (int j = 0; j < len; ++j) {
          (*g)[static_cast<std::size_t>(b) * width + start + j] +=
              self.grad[static_cast<std::size_t>(b) * len + j];
        }
      }
    }
  });
}

/// Row t of every sequence: x [B, T, F] -> [B, F].
template <typename T>
Var<T> time_step(const Var<T>& x, int t) {
  detail::require(x.value().rank() == 3 && t >= 0 && t < x.value().dim(1),
                  "time_step: index out of range for " + to_string(x.shape()));
  const int batch = x.value().dim(0), steps = x.value().dim(1), feat = x.value().dim(2);
  Tensor<T> y({batch, feat});
  for (int b = 0; b < batch; ++b) {
    std::copy_n(x.value().data() + (static_cast<std::size_t>(b) * steps + t) * feat, feat,
                y.data() + static_cast<std::size_t>(b) * feat);
  }
  return make_result<T>(std::move(y), {x}, [batch, steps, feat, t](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (int b = 0; b < batch; ++b) {
        T* dst = g->data() + (static_cast<std::size_t>(b) * steps + t) * feat;
        const T* src = self.grad.data() + static_cast<std::size_t>(b) * feat;
        for (int j = 0; j < feat; ++j) dst[j] += src[j];
      }
    }
  });
}

/// Stacks T tensors of shape [B, F] into [B, T, F].
template <typename T>
Var<T> stack_steps(const std::vector<Var<T>>& steps) {
  detail::require(!steps.empty(), "stack_steps: no inputs");
  const int batch = steps.front().value().dim(0), feat = steps.front().value().dim(1);
  const int count = static_cast<int>(steps.size());
  Tensor<T> y({batch, count, feat});
  for (int t = 0; t < count; ++t) {
    detail::require_same(steps[t].shape(), steps.front().shape(), "stack_steps");
    for (int b = 0; b < batch; ++b) {
      std::copy_n(steps[t].value().data() + static_cast<std::size_t>(b) * feat, feat,
                  y.data() + (static_cast<std::size_t>(b) * count + t) * feat);
    }
  }
  return make_result<T>(std::move(y), steps, [batch, count, feat](Node<T>& self) {
    for (int t = 0; t < count; ++t) {
      if (auto* g = detail::grad_of(self, static_cast<std::size_t>(t))) {
        for (int b = 0; b < batch; ++b) {
          const T* src = self.grad.data() + (static_cast<std::size_t>(b) * count + t) * feat;
          T* dst = g->data() + static_cast<std::size_t>(b) * feat;
          for (int j = 0; j < feat; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

/// Row sums of x [B, K] -> [B, 1].
template <typename T>
Var<T> sum_cols(const Var<T>& x) {
  detail::require(x.value().rank() == 2, "sum_cols: expected rank 2, got " + to_string(x.shape()));
  const int batch = x.value().dim(0), width = x.value().dim(1);
  Tensor<T> y({batch, 1});
  for (int b = 0; b < batch; ++b) {
    T s = 0;
    for (int j = 0; j < width; ++j) s += x.value()[static_cast<std::size_t>(b) * width + j];
    y[static_cast<std::size_t>(b)] = s;
  }
  return make_result<T>(std::move(y), {x}, [batch, width](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (int b = 0; b < batch; ++b) {
        for (int j = 0; j < width; ++j) {
          (*g)[static_cast<std::size_t>(b) * width + j] += self.grad[static_cast<std::size_t>(b)];
        }
      }
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x.value()[k];
  return make_result<T>(Tensor<T>({1}, std::vector<T>{s}), {x}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (std::size_t k = 0; k < g->size(); ++k) (*g)[k] += self.grad[0];
    }
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  detail::require(x.size() > 0, "mean: empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.size()));
}

namespace detail {

struct ConvGeometry {
  int batch, in_ch, height, width;
  int out_ch, kh, kw;
  int pad_top, pad_left, pad_bottom, pad_right;
  int out_h, out_w;
  int patch() const { return in_ch * kh * kw; }
  int pixels() const { return out_h * out_w; }
};

// Valid output-column range [lo, hi) for kernel column kj.
inline void column_span(const ConvGeometry& g, int kj, int& lo, int& hi) {
  lo = std::max(0, g.pad_left - kj);
  hi = std::min(g.out_w, g.width + g.pad_left - kj);
  if (hi < lo) hi = lo;
}

/// Writes sample x into columns [offset, offset + pixels) of a [patch, stride] matrix.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols, std::size_t stride, std::size_t offset) {
  for (int c = 0; c < g.in_ch; ++c) {
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        T* row = cols + static_cast<std::size_t>((c * g.kh + ki) * g.kw + kj) * stride + offset;
        int lo, hi;
        column_span(g, kj, lo, hi);
        for (int oi = 0; oi < g.out_h; ++oi) {
          T* out = row + static_cast<std::size_t>(oi) * g.out_w;
          const int ii = oi + ki - g.pad_top;
          if (ii < 0 || ii >= g.height) {
            std::fill(out, out + g.out_w, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.height + ii) * g.width + (kj - g.pad_left);
          std::fill(out, out + lo, T(0));
          std::copy(src + lo, src + hi, out + lo);
          std::fill(out + hi, out + g.out_w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx, std::size_t stride, std::size_t offset) {
  for (int c = 0; c < g.in_ch; ++c) {
    for (int ki = 0; ki < g.kh; ++ki) {
      for (int kj = 0; kj < g.kw; ++kj) {
        const T* row = cols + static_cast<std::size_t>((c * g.kh + ki) * g.kw + kj) * stride + offset;
        int lo, hi;
        column_span(g, kj, lo, hi);
        for (int oi = 0; oi < g.out_h; ++oi) {
          const int ii = oi + ki - g.pad_top;
          if (ii < 0 || ii >= g.height) continue;
          const T* in = row + static_cast<std::size_t>(oi) * g.out_w;
          T* dst = dx + (static_cast<std::size_t>(c) * g.height + ii) * g.width + (kj - g.pad_left);
          for (int oj = lo; oj < hi; ++oj) dst[oj] += in[oj];
        }
      }
    }
  }
}

}  // namespace detail

struct Padding {
  int top = 0, left = 0, bottom = 0, right = 0;
};

/// Stride-1 cross-correlation: x [B, C, H, W], w [O, C, kh, kw], b [O].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, Padding pad = {}) {
  using namespace detail;
  require(x.value().rank() == 4 && w.value().rank() == 4 && b.value().rank() == 1,
          "conv2d: expected x [B,C,H,W], w [O,C,kh,kw], b [O]");
  ConvGeometry g{};
  g.batch = x.value().dim(0);
  g.in_ch = x.value().dim(1);
  g.height = x.value().dim(2);
  g.width = x.value().dim(3);
  g.out_ch = w.value().dim(0);
  g.kh = w.value().dim(2);
  g.kw = w.value().dim(3);
  g.pad_top = pad.top;
  g.pad_left = pad.left;
  g.pad_bottom = pad.bottom;
  g.pad_right = pad.right;
  require(w.value().dim(1) == g.in_ch && b.value().dim(0) == g.out_ch,
          "conv2d: kernel " + to_string(w.shape()) + " incompatible with input " + to_string(x.shape()));
  g.out_h = g.height + pad.top + pad.bottom - g.kh + 1;
  g.out_w = g.width + pad.left + pad.right - g.kw + 1;
  require(g.out_h >= 1 && g.out_w >= 1,
          "conv2d: kernel " + to_string(w.shape()) + " larger than padded input " + to_string(x.shape()));

  // Per-sample GEMMs keep the column buffers cache-sized.
  const std::size_t pix = static_cast<std::size_t>(g.pixels());
  const std::size_t col_size = static_cast<std::size_t>(g.patch()) * pix;
  const std::size_t in_size = static_cast<std::size_t>(g.in_ch) * g.height * g.width;
  auto cols = std::make_shared<std::vector<T>>(col_size * g.batch);
  Tensor<T> y({g.batch, g.out_ch, g.out_h, g.out_w});
  ConstMatMap<T> wm(w.value().data(), g.out_ch, g.patch());
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(b.value().data(), g.out_ch);
  for (int n = 0; n < g.batch; ++n) {
    T* cn = cols->data() + col_size * n;
    im2col(x.value().data() + in_size * n, g, cn, pix, 0);
    MatMap<T> yn(y.data() + static_cast<std::size_t>(n) * g.out_ch * pix, g.out_ch, g.pixels());
    yn.noalias() = wm.lazyProduct(ConstMatMap<T>(cn, g.patch(), g.pixels()));
    yn.colwise() += bias;
  }
  return make_result<T>(std::move(y), {x, w, b}, [g, cols, pix, col_size, in_size](Node<T>& self) {
    ConstMatMap<T> wm(self.parents[1]->value.data(), g.out_ch, g.patch());
    auto* gx = grad_of(self, 0);
    auto* gw = grad_of(self, 1);
    auto* gb = grad_of(self, 2);
    RowMat<T> dcols(gx ? g.patch() : 0, gx ? g.pixels() : 0);
    for (int n = 0; n < g.batch; ++n) {
      ConstMatMap<T> gy(self.grad.data() + static_cast<std::size_t>(n) * g.out_ch * pix, g.out_ch, g.pixels());
      ConstMatMap<T> cn(cols->data() + col_size * n, g.patch(), g.pixels());
      if (gw) MatMap<T>(gw->data(), g.out_ch, g.patch()).noalias() += gy.lazyProduct(cn.transpose());
      if (gb) Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gb->data(), g.out_ch) += gy.rowwise().sum();
      if (gx) {
        dcols.noalias() = wm.transpose().lazyProduct(gy);
        col2im_add(dcols.data(), g, gx->data() + in_size * n, pix, 0);
      }
    }
  });
}

/// Nearest-neighbour ×2 upsampling of x [B, C, H, W].
template <typename T>
Var<T> upsample_nearest2x(const Var<T>& x) {
  detail::require(x.value().rank() == 4, "upsample_nearest2x: expected rank 4");
  const int planes = x.value().dim(0) * x.value().dim(1);
  const int h = x.value().dim(2), w = x.value().dim(3);
  Tensor<T> y({x.value().dim(0), x.value().dim(1), 2 * h, 2 * w});
  for (int p = 0; p < planes; ++p) {
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) {
        y[(static_cast<std::size_t>(p) * 2 * h + i) * 2 * w + j] =
            x.value()[(static_cast<std::size_t>(p) * h + i / 2) * w + j / 2];
      }
    }
  }
  return make_result<T>(std::move(y), {x}, [planes, h, w](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) {
      for (int p = 0; p < planes; ++p) {
        for (int i = 0; i < 2 * h; ++i) {
          for (int j = 0; j < 2 * w; ++j) {
            (*g)[(static_cast<std::size_t>(p) * h + i / 2) * w + j / 2] +=
                self.grad[(static_cast<std::size_t>(p) * 2 * h + i) * 2 * w + j];
          }
        }
      }
    }
  });
}

/// Corner-aligned bilinear resize of x [B, C, H, W] to [B, C, out_h, out_w].
template <typename T>
Var<T> resize_bilinear(const Var<T>& x, int out_h, int out_w) {
  detail::require(x.value().rank() == 4 && out_h >= 1 && out_w >= 1, "resize_bilinear: bad shape");
  const int planes = x.value().dim(0) * x.value().dim(1);
  const int h = x.value().dim(2), w = x.value().dim(3);
  struct Tap {
    int lo, hi;
    T frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    for (int k = 0; k < out; ++k) {
      const T pos = out == 1 ? T(0) : static_cast<T>(k) * static_cast<T>(in - 1) / static_cast<T>(out - 1);
      int lo = std::min(static_cast<int>(std::floor(pos)), in - 1);
      int hi = std::min(lo + 1, in - 1);
      t[static_cast<std::size_t>(k)] = {lo, hi, pos - static_cast<T>(lo)};
    }
    return t;
  };
  auto ti = taps(h, out_h);
  auto tj = taps(w, out_w);
  Tensor<T> y({x.value().dim(0), x.value().dim(1), out_h, out_w});
  for (int p = 0; p < planes; ++p) {
    const T* src = x.value().data() + static_cast<std::size_t>(p) * h * w;
    for (int i = 0; i < out_h; ++i) {
      const auto& a = ti[static_cast<std::size_t>(i)];
      for (int j = 0; j < out_w; ++j) {
        const auto& c = tj[static_cast<std::size_t>(j)];
        const T top = src[a.lo * w + c.lo] * (T(1) - c.frac) + src[a.lo * w + c.hi] * c.frac;
        const T bot = src[a.hi * w + c.lo] * (T(1) - c.frac) + src[a.hi * w + c.hi] * c.frac;
        y[(static_cast<std::size_t>(p) * out_h + i) * out_w + j] = top * (T(1) - a.frac) + bot * a.frac;
      }
    }
  }
  return make_result<T>(std::move(y), {x}, [planes, h, w, out_h, out_w, ti, tj](Node<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    for (int p = 0; p < planes; ++p) {
      T* dst = g->data() + static_cast<std::size_t>(p) * h * w;
      for (int i = 0; i < out_h; ++i) {
        const auto& a = ti[static_cast<std::size_t>(i)];
        for (int j = 0; j < out_w; ++j) {
          const auto& c = tj[static_cast<std::size_t>(j)];
          const T gy = self.grad[(static_cast<std::size_t>(p) * out_h + i) * out_w + j];
          dst[a.lo * w + c.lo] += gy * (T(1) - a.frac) * (T(1) - c.frac);
          dst[a.lo * w + c.hi] += gy * (T(1) - a.frac) * c.frac;
          dst[a.hi * w + c.lo] += gy * a.frac * (T(1) - c.frac);
          dst[a.hi * w + c.hi] += gy * a.frac * c.frac;
        }
      }
    }
  });
}

/// Per-row normalization of x [B, F] followed by the affine map gamma·x̂ + beta.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  detail::require(x.value().rank() == 2 && gamma.size() == static_cast<std::size_t>(x.value().dim(1)) &&
                      beta.size() == gamma.size(),
                  "layer_norm: expected x [B,F] with gamma, beta [F]");
  const int batch = x.value().dim(0), feat = x.value().dim(1);
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(batch));
  Tensor<T> y(x.shape());
  for (int b = 0; b < batch; ++b) {
    const T* row = x.value().data() + static_cast<std::size_t>(b) * feat;
    T mu = 0;
    for (int j = 0; j < feat; ++j) mu += row[j];
    mu /= static_cast<T>(feat);
    T var = 0;
    for (int j = 0; j < feat; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(feat);
    const T r = T(1) / std::sqrt(var + eps);
    (*rstd)[static_cast<std::size_t>(b)] = r;
    for (int j = 0; j < feat; ++j) {
      const std::size_t k = static_cast<std::size_t>(b) * feat + j;
      (*xhat)[k] = (row[j] - mu) * r;
      y[k] = gamma.value()[static_cast<std::size_t>(j)] * (*xhat)[k] + beta.value()[static_cast<std::size_t>(j)];
    }
  }
  return make_result<T>(std::move(y), {x, gamma, beta}, [batch, feat, xhat, rstd](Node<T>& self) {
    const auto& gam = self.parents[1]->value;
    auto* gx = detail::grad_of(self, 0);
    auto* gg = detail::grad_of(self, 1);
    auto* gbeta = detail::grad_of(self, 2);
    std::vector<T> dxhat(static_cast<std::size_t>(feat));
    for (int b = 0; b < batch; ++b) {
      const std::size_t base = static_cast<std::size_t>(b) * feat;
      T s1 = 0, s2 = 0;
      for (int j = 0; j < feat; ++j) {
        const T gy = self.grad[base + j];
        if (gg) (*gg)[static_cast<std::size_t>(j)] += gy * (*xhat)[base + j];
        if (gbeta) (*gbeta)[static_cast<std::size_t>(j)] += gy;
        dxhat[static_cast<std::size_t>(j)] = gy * gam[static_cast<std::size_t>(j)];
        s1 += dxhat[static_cast<std::size_t>(j)];
        s2 += dxhat[static_cast<std::size_t>(j)] * (*xhat)[base + j];
      }
      if (!gx) continue;
      const T r = (*rstd)[static_cast<std::size_t>(b)];
      const T inv_f = T(1) / static_cast<T>(feat);
      for (int j = 0; j < feat; ++j) {
        (*gx)[base + j] += r * (dxhat[static_cast<std::size_t>(j)] - inv_f * s1 - (*xhat)[base + j] * inv_f * s2);
      }
    }
  });
}

/// Inverted dropout. Identity when not training or p == 0.
template <typename T, typename Gen>
Var<T> dropout(const Var<T>& x, T p, bool training, Gen& gen) {
  if (!training || p <= T(0)) return x;
  Tensor<T> mask(x.shape());
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T s = T(1) / (T(1) - p);
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = keep(gen) ? s : T(0);
  return mul(x, constant(std::move(mask)));
}

}  // namespace thermotune::nn
