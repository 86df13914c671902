#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "thermotune/nn/layers.hpp"

namespace thermotune::nn {

/// Checkpoint container, little-endian:
///   magic "TTCKPT\0\0", u32 version, u32 tensor count, then per tensor
///   u32 name length, name bytes, u32 rank, u32 dims[rank], f32 data[prod(dims)].
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

template <typename T>
std::vector<NamedTensor> state_dict(const Module<T>& module, const std::string& prefix = "") {
  std::vector<NamedTensor> out;
  for (const auto& [name, p] : module.named_parameters()) {
    out.push_back({prefix + name, p.value().template cast<float>()});
  }
  return out;
}

/// Loads every parameter of `module` from `tensors` by name; missing or mis-shaped entries throw.
template <typename T>
void load_state_dict(Module<T>& module, const std::vector<NamedTensor>& tensors, const std::string& prefix = "") {
  for (auto& [name, p] : module.named_parameters()) {
    const std::string key = prefix + name;
    const NamedTensor* hit = nullptr;
    for (const auto& t : tensors) {
      if (t.name == key) hit = &t;
    }
    if (!hit) throw ShapeMismatch("checkpoint has no tensor '" + key + "'");
    detail::require_same(hit->value.shape(), p.shape(), key.c_str());
    auto v = p;
    v.mutable_value() = hit->value.template cast<T>();
  }
}

}  // namespace thermotune::nn
