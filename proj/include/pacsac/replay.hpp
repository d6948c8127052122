#ifndef PACSAC_REPLAY_HPP
#define PACSAC_REPLAY_HPP

#include "pacsac/diffmath.hpp"
#include "pacsac/rng.hpp"

#include <vector>

namespace pacsac::replay {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

/// Minibatch in matrix form, one transition per row.
struct Batch {
  Matrix states;       // [M x d_s]
  Matrix actions;      // [M x d_a]
  Matrix rewards;      // [M x 1]
  Matrix next_states;  // [M x d_s]
  Matrix terminals;    // [M x 1], 1.0 for absorbing transitions

  std::size_t size() const { return static_cast<std::size_t>(rewards.rows()); }
};

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// Slot `i` in [0, size()), in storage order.
  Transition at(std::size_t i) const;

  /// `count` indices drawn uniformly with replacement from [0, size()).
  std::vector<std::size_t> sample_indices(std::size_t count, RandomStream& rng) const;
  Batch gather(const std::vector<std::size_t>& indices) const;
  Batch sample(std::size_t count, RandomStream& rng) const;

 private:
  std::size_t capacity_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
  std::vector<char> terminals_;
};

}  // namespace pacsac::replay

#endif  // PACSAC_REPLAY_HPP
