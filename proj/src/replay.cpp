#include "pacsac/replay.hpp"

#include <algorithm>
#include <cmath>

namespace pacsac::replay {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw ContractError("ReplayBuffer: capacity must be positive");
  states_.resize(capacity * state_dim);
  actions_.resize(capacity * action_dim);
  rewards_.resize(capacity);
  next_states_.resize(capacity * state_dim);
  terminals_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim_) {
    throw DimensionError("ReplayBuffer::push: transition shapes do not match buffer (" + std::to_string(state_dim_) +
                         ", " + std::to_string(action_dim_) + ")");
  }
  if (!std::isfinite(t.reward)) throw DomainError("ReplayBuffer::push: non-finite reward");
  const std::size_t i = cursor_;
  std::copy(t.state.begin(), t.state.end(), states_.begin() + i * state_dim_);
  std::copy(t.action.begin(), t.action.end(), actions_.begin() + i * action_dim_);
  std::copy(t.next_state.begin(), t.next_state.end(), next_states_.begin() + i * state_dim_);
  rewards_[i] = t.reward;
  terminals_[i] = t.terminal ? 1 : 0;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw ContractError("ReplayBuffer::at: index " + std::to_string(i) + " >= size " + std::to_string(size_));
  Transition t;
  t.state.assign(states_.begin() + i * state_dim_, states_.begin() + (i + 1) * state_dim_);
  t.action.assign(actions_.begin() + i * action_dim_, actions_.begin() + (i + 1) * action_dim_);
  t.next_state.assign(next_states_.begin() + i * state_dim_, next_states_.begin() + (i + 1) * state_dim_);
  t.reward = rewards_[i];
  t.terminal = terminals_[i] != 0;
  return t;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, RandomStream& rng) const {
  if (size_ == 0) throw ContractError("ReplayBuffer::sample: buffer is empty");
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = rng.index(size_);
  return idx;
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  const auto m = static_cast<Eigen::Index>(indices.size());
  const auto ds = static_cast<Eigen::Index>(state_dim_);
  const auto da = static_cast<Eigen::Index>(action_dim_);
  Batch b{Matrix(m, ds), Matrix(m, da), Matrix(m, 1), Matrix(m, ds), Matrix(m, 1)};
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::size_t i = indices[static_cast<std::size_t>(r)];
    if (i >= size_) throw ContractError("ReplayBuffer::gather: index out of range");
    for (Eigen::Index c = 0; c < ds; ++c) {
      b.states(r, c) = states_[i * state_dim_ + c];
      b.next_states(r, c) = next_states_[i * state_dim_ + c];
    }
    for (Eigen::Index c = 0; c < da; ++c) b.actions(r, c) = actions_[i * action_dim_ + c];
    b.rewards(r, 0) = rewards_[i];
    b.terminals(r, 0) = terminals_[i] ? 1.0 : 0.0;
  }
  return b;
}

Batch ReplayBuffer::sample(std::size_t count, RandomStream& rng) const { return gather(sample_indices(count, rng)); }

}  // namespace pacsac::replay
