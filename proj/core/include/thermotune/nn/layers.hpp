#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "thermotune/nn/ops.hpp"
#include "thermotune/random.hpp"

namespace thermotune::nn {

/// Owns named parameters and child modules. Not copyable: build a second instance
/// and use copy_from() to duplicate weights.
template <typename T>
class Module {
 public:
  Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  /// Parameters in registration order, names prefixed by the child path.
  std::vector<std::pair<std::string, Var<T>>> named_parameters() const {
    std::vector<std::pair<std::string, Var<T>>> out = params_;
    for (const auto& [name, child] : children_) {
      for (auto& [pname, p] : child->named_parameters()) out.emplace_back(name + "." + pname, p);
    }
    return out;
  }

  std::vector<Var<T>> parameters() const {
    std::vector<Var<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.zero_grad();
  }

  void train(bool on = true) {
    training_ = on;
    for (auto& [name, child] : children_) child->train(on);
  }
  void eval() { train(false); }
  bool training() const noexcept { return training_; }

  void copy_from(const Module& other) {
    auto dst = parameters();
    auto src = other.parameters();
    if (dst.size() != src.size()) throw ShapeMismatch("copy_from: parameter count differs");
    for (std::size_t k = 0; k < dst.size(); ++k) {
      detail::require_same(dst[k].shape(), src[k].shape(), "copy_from");
      dst[k].mutable_value() = src[k].value();
    }
  }

  /// target ← tau·source + (1 − tau)·target
  void polyak_from(const Module& source, T tau) {
    auto dst = parameters();
    auto src = source.parameters();
    if (dst.size() != src.size()) throw ShapeMismatch("polyak_from: parameter count differs");
    for (std::size_t k = 0; k < dst.size(); ++k) {
      auto& d = dst[k].mutable_value();
      const auto& s = src[k].value();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = tau * s[i] + (T(1) - tau) * d[i];
    }
  }

 protected:
  Var<T>& register_parameter(std::string name, Tensor<T> value) {
    params_.emplace_back(std::move(name), parameter(std::move(value)));
    return params_.back().second;
  }
  void register_module(std::string name, Module* child) { children_.emplace_back(std::move(name), child); }

 private:
  std::vector<std::pair<std::string, Var<T>>> params_;
  std::vector<std::pair<std::string, Module*>> children_;
  bool training_ = true;
};

/// Uniform(−1/√fan_in, 1/√fan_in) initialization.
template <typename T>
Tensor<T> uniform_init(Shape shape, int fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
class Linear : public Module<T> {
 public:
  Linear(int in, int out, Rng& rng) : in_(in), out_(out) {
    this->register_parameter("weight", uniform_init<T>({out, in}, in, rng));
    this->register_parameter("bias", uniform_init<T>({out}, in, rng));
  }

  Var<T> forward(const Var<T>& x) const {
    auto ps = this->parameters();
    return linear(x, ps[0], ps[1]);
  }

  Var<T> weight() const { return this->parameters()[0]; }
  Var<T> bias() const { return this->parameters()[1]; }
  int in_features() const noexcept { return in_; }
  int out_features() const noexcept { return out_; }

 private:
  int in_, out_;
};

template <typename T>
class LayerNorm : public Module<T> {
 public:
  explicit LayerNorm(int features, T eps = T(1e-5)) : eps_(eps) {
    this->register_parameter("gamma", Tensor<T>({features}, T(1)));
    this->register_parameter("beta", Tensor<T>({features}, T(0)));
  }

  Var<T> forward(const Var<T>& x) const {
    auto ps = this->parameters();
    return layer_norm(x, ps[0], ps[1], eps_);
  }

 private:
  T eps_;
};

template <typename T>
class Conv2d : public Module<T> {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, Rng& rng, Padding pad = {}) : pad_(pad) {
    const int fan_in = in_ch * kernel * kernel;
    this->register_parameter("weight", uniform_init<T>({out_ch, in_ch, kernel, kernel}, fan_in, rng));
    this->register_parameter("bias", uniform_init<T>({out_ch}, fan_in, rng));
  }

  Var<T> forward(const Var<T>& x) const {
    auto ps = this->parameters();
    return conv2d(x, ps[0], ps[1], pad_);
  }

 private:
  Padding pad_;
};

/// Multi-layer LSTM with gate order (i, f, g, o). Returns the top layer's last hidden state.
template <typename T>
class LSTM : public Module<T> {
 public:
  LSTM(int input, int hidden, int layers, Rng& rng) : input_(input), hidden_(hidden), layers_(layers) {
    if (input < 1 || hidden < 1 || layers < 1) throw ShapeMismatch("LSTM: sizes must be positive");
    for (int l = 0; l < layers; ++l) {
      const int in = l == 0 ? input : hidden;
      const std::string p = "l" + std::to_string(l) + ".";
      this->register_parameter(p + "w_ih", uniform_init<T>({4 * hidden, in}, hidden, rng));
      this->register_parameter(p + "w_hh", uniform_init<T>({4 * hidden, hidden}, hidden, rng));
      this->register_parameter(p + "b", uniform_init<T>({4 * hidden}, hidden, rng));
    }
  }

  /// seq [B, T, input] -> [B, hidden]
  Var<T> forward(const Var<T>& seq) const {
    detail::require(seq.value().rank() == 3 && seq.value().dim(2) == input_ && seq.value().dim(1) >= 1,
                    "LSTM: expected [B,T," + std::to_string(input_) + "], got " + to_string(seq.shape()));
    const int batch = seq.value().dim(0), steps = seq.value().dim(1);
    const int H = hidden_;
    auto ps = this->parameters();
    Var<T> x = seq;
    Var<T> h;
    for (int l = 0; l < layers_; ++l) {
      const auto& w_ih = ps[static_cast<std::size_t>(3 * l)];
      const auto& w_hh = ps[static_cast<std::size_t>(3 * l + 1)];
      const auto& b = ps[static_cast<std::size_t>(3 * l + 2)];
      const int in = x.value().dim(2);
      Var<T> proj = reshape(linear(reshape(x, {batch * steps, in}), w_ih, b), {batch, steps, 4 * H});
      h = constant(Tensor<T>({batch, H}));
      Var<T> c = constant(Tensor<T>({batch, H}));
      std::vector<Var<T>> outputs;
      const bool keep = l + 1 < layers_;
      if (keep) outputs.reserve(static_cast<std::size_t>(steps));
      for (int t = 0; t < steps; ++t) {
        Var<T> gates = add(time_step(proj, t), matmul_bt(h, w_hh));
        Var<T> i = sigmoid(slice_cols(gates, 0, H));
        Var<T> f = sigmoid(slice_cols(gates, H, H));
        Var<T> g = tanh(slice_cols(gates, 2 * H, H));
        Var<T> o = sigmoid(slice_cols(gates, 3 * H, H));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh(c));
        if (keep) outputs.push_back(h);
      }
      if (keep) x = stack_steps(outputs);
    }
    return h;
  }

  int hidden_size() const noexcept { return hidden_; }

 private:
  int input_, hidden_, layers_;
};

}  // namespace thermotune::nn
