#ifndef PACSAC_OPTIM_HPP
#define PACSAC_OPTIM_HPP

#include "pacsac/diffmath.hpp"

#include <span>
#include <vector>

namespace pacsac::diff {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment gradient descent. Moment buffers are sized on the first
/// step; later calls must pass parameters with the same shapes in the same
/// order.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<Parameter* const> params);
  const AdamOptions& options() const { return options_; }
  long long step_count() const { return t_; }

 private:
  AdamOptions options_;
  long long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

void zero_grad(std::span<Parameter* const> params);

/// target <- tau * online + (1 - tau) * target, parameter by parameter.
void polyak_update(std::span<Parameter* const> target, std::span<Parameter* const> online, double tau);

/// Copies values (not gradients) from `from` into `to`.
void copy_values(std::span<Parameter* const> to, std::span<Parameter* const> from);

std::size_t parameter_count(std::span<Parameter* const> params);

}  // namespace pacsac::diff

#endif  // PACSAC_OPTIM_HPP
