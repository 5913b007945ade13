#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "uavland/types.hpp"

namespace uavland {

struct Transition {
  Observation state{};
  std::array<double, kActionDim> action{};
  double reward = 0.0;
  Observation next_state{};
  bool done = false;

  bool operator==(const Transition&) const = default;
};

// Fixed-capacity ring buffer; uniform sampling with replacement, so a batch
// may be larger than the number of stored items.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::uint64_t seed = 0)
      : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer capacity must be positive");
    storage_.reserve(std::min<std::size_t>(capacity, 1u << 16));
  }

  void push(const Transition& t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(t);
    } else {
      storage_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::vector<Transition> sample(std::size_t batch) {
    if (batch == 0) throw std::invalid_argument("sample: batch must be positive");
    if (storage_.empty()) throw std::logic_error("sample: buffer is empty");
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<Transition> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(storage_[pick(rng_)]);
    return out;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }

  // Oldest-first view of stored transitions.
  std::vector<Transition> contents() const {
    std::vector<Transition> out;
    out.reserve(storage_.size());
    const std::size_t start = storage_.size() < capacity_ ? 0 : cursor_;
    for (std::size_t i = 0; i < storage_.size(); ++i) {
      out.push_back(storage_[(start + i) % storage_.size()]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

}  // namespace uavland
