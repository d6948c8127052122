#ifndef PACSAC_LOSSES_HPP
#define PACSAC_LOSSES_HPP

#include "pacsac/diffmath.hpp"

namespace pacsac::agents {

using diff::DiffArray;

/// Which critic loss terms are active. Data fit, complexity penalty,
/// overestimation correction.
struct LossTerms {
  bool data_fit = true;
  bool complexity = true;
  bool correction = true;

  bool operator==(const LossTerms&) const = default;
};

/// Population variance mean(q^2) - mean(q)^2 of a [M x 1] prediction batch.
DiffArray empirical_variance(const DiffArray& q);

struct PacLoss {
  DiffArray total;
  double data_fit = 0.0;
  double complexity = 0.0;
  double variance = 0.0;
};

/// data_fit * mean((q - y)^2) + complexity * sqrt(kl / N) - correction * gamma * xi * var(q).
/// `targets` are treated as constants. Throws ContractError when N == 0.
PacLoss pac_critic_loss(const DiffArray& q, const Matrix& targets, const DiffArray& kl, std::size_t buffer_size,
                        double gamma, double xi, const LossTerms& terms);

/// y = r + (1 - terminal) * gamma * (next_q - alpha * next_log_prob), all [M x 1].
Matrix soft_bellman_targets(const Matrix& rewards, const Matrix& terminals, const Matrix& next_q,
                            const Matrix& next_log_prob, double alpha, double gamma);

/// mean(alpha * log_prob - q); the entropy part is dropped when
/// `entropy_term` is false.
DiffArray policy_improvement_loss(const DiffArray& log_prob, const DiffArray& q, double alpha, bool entropy_term);

}  // namespace pacsac::agents

#endif  // PACSAC_LOSSES_HPP
