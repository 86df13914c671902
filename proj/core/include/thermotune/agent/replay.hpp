#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "thermotune/agent/networks.hpp"

namespace thermotune::agent {

using GridMask = std::array<std::uint8_t, env::kActionSize>;

/// Flat float copy of an observation together with its 8x8 action-grid mask.
struct PackedObservation {
  std::array<Real, env::kContextSize> context{};
  std::vector<Real> window;  ///< N x 4, normalized
  std::array<Real, env::kActionSize> image{};
  GridMask mask{};
};

PackedObservation pack(const env::Observation& obs, const env::ActionMask& mask, std::size_t window);

ObservationBatch make_batch(const std::vector<const PackedObservation*>& items);

struct Transition {
  PackedObservation obs;
  env::ActionTensor action{};
  double reward = 0.0;
  PackedObservation next;
};

struct Batch {
  ObservationBatch obs;
  ObservationBatch next;
  Tensor action;  ///< [B, 128]
  Tensor reward;  ///< [B, 1]
  int size() const { return obs.size(); }
};

Batch make_batch(const std::vector<const Transition*>& items);

/// Fixed-capacity ring buffer; batches are drawn uniformly without replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Transition& at(std::size_t k) const { return items_.at(k); }

  /// Throws BufferUnderflow when fewer than `count` transitions are stored.
  std::vector<const Transition*> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

}  // namespace thermotune::agent
