#include "thermotune/agent/replay.hpp"

#include <algorithm>
#include <iterator>
#include <numeric>

namespace thermotune::agent {

PackedObservation pack(const env::Observation& obs, const env::ActionMask& mask, std::size_t window) {
  if (obs.window.samples != window || obs.window.normalized.size() != window * env::kSignalChannels) {
    throw ShapeMismatch("observation window has " + std::to_string(obs.window.samples) +
                        " samples, agent expects " + std::to_string(window));
  }
  PackedObservation p;
  p.context = {static_cast<Real>(obs.context.xi_th_one_hot[0]), static_cast<Real>(obs.context.xi_th_one_hot[1]),
               static_cast<Real>(obs.context.setpoint)};
  // Diverged evaluations produce huge temperatures; keep the network input bounded.
  p.window.resize(obs.window.normalized.size());
  std::transform(obs.window.normalized.begin(), obs.window.normalized.end(), p.window.begin(),
                 [](double v) { return static_cast<Real>(std::clamp(v, -10.0, 10.0)); });
  std::transform(obs.image.begin(), obs.image.end(), p.image.begin(), [](double v) { return static_cast<Real>(v); });
  p.mask = env::action_grid_mask(mask);
  return p;
}

ObservationBatch make_batch(const std::vector<const PackedObservation*>& items) {
  if (items.empty()) throw ShapeMismatch("make_batch: empty batch");
  const int batch = static_cast<int>(items.size());
  const int steps = static_cast<int>(items.front()->window.size() / env::kSignalChannels);
  const int sig = static_cast<int>(env::kSignalChannels);
  const int ctx = static_cast<int>(env::kContextSize);
  const int side = static_cast<int>(env::kImageSize);
  ObservationBatch b;
  b.context = Tensor({batch, ctx});
  b.window = Tensor({batch, steps, sig});
  b.image = Tensor({batch, static_cast<int>(env::kChannels), side, side});
  b.mask = Tensor({batch, kAction});
  for (int n = 0; n < batch; ++n) {
    const auto& p = *items[static_cast<std::size_t>(n)];
    if (p.window.size() != static_cast<std::size_t>(steps * sig)) throw ShapeMismatch("make_batch: ragged windows");
    std::copy(p.context.begin(), p.context.end(), b.context.data() + n * ctx);
    std::copy(p.window.begin(), p.window.end(), b.window.data() + static_cast<std::size_t>(n) * steps * sig);
    std::copy(p.image.begin(), p.image.end(), b.image.data() + static_cast<std::size_t>(n) * kAction);
    for (int k = 0; k < kAction; ++k) {
      b.mask[static_cast<std::size_t>(n * kAction + k)] = p.mask[static_cast<std::size_t>(k)] ? Real(1) : Real(0);
    }
  }
  return b;
}

Batch make_batch(const std::vector<const Transition*>& items) {
  std::vector<const PackedObservation*> obs, next;
  for (const auto* t : items) {
    obs.push_back(&t->obs);
    next.push_back(&t->next);
  }
  Batch b;
  b.obs = make_batch(obs);
  b.next = make_batch(next);
  const int batch = static_cast<int>(items.size());
  b.action = Tensor({batch, kAction});
  b.reward = Tensor({batch, 1});
  for (int n = 0; n < batch; ++n) {
    const auto& t = *items[static_cast<std::size_t>(n)];
    for (int k = 0; k < kAction; ++k) {
      b.action[static_cast<std::size_t>(n * kAction + k)] = static_cast<Real>(t.action[static_cast<std::size_t>(k)]);
    }
    b.reward[static_cast<std::size_t>(n)] = static_cast<Real>(t.reward);
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (count == 0 || items_.size() < count) {
    throw BufferUnderflow("replay buffer holds " + std::to_string(items_.size()) + " transitions, batch needs " +
                          std::to_string(count));
  }
  std::vector<std::size_t> all(items_.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  std::vector<const Transition*> out;
  out.reserve(count);
  for (auto k : picked) out.push_back(&items_[k]);
  return out;
}

}  // namespace thermotune::agent
