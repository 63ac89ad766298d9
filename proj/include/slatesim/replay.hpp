// Bounded FIFO experience buffer with uniform sampling.
#pragma once

#include <deque>
#include <stdexcept>
#include <vector>

#include "slatesim/rng.hpp"
#include "slatesim/types.hpp"

namespace slatesim {

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
  }

  /// Appends a record, evicting the oldest one when full.
  void push(TransitionRecord record) {
    if (records_.size() == capacity_) records_.pop_front();
    records_.push_back(std::move(record));
  }

  /// batch_size records drawn uniformly with replacement.
  std::vector<TransitionRecord> sample(std::size_t batch_size, RandomSource& rng) const {
    if (records_.empty()) throw std::logic_error("sample from empty replay buffer");
    std::vector<TransitionRecord> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i)
      batch.push_back(records_[rng.uniform_int(static_cast<long>(records_.size()))]);
    return batch;
  }

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  const TransitionRecord& operator[](std::size_t i) const { return records_[i]; }

 private:
  std::size_t capacity_;
  std::deque<TransitionRecord> records_;
};

}  // namespace slatesim
