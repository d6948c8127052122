#include "pacsac/losses.hpp"

namespace pacsac::agents {

using namespace pacsac::diff;

DiffArray empirical_variance(const DiffArray& q) {
  DiffArray m = mean(q);
  return mean(square(q)) - square(m);
}

PacLoss pac_critic_loss(const DiffArray& q, const Matrix& targets, const DiffArray& kl, std::size_t buffer_size,
                        double gamma, double xi, const LossTerms& terms) {
  if (buffer_size == 0) throw ContractError("pac_critic_loss: buffer size N must be positive");
  if (q.cols() != 1 || targets.cols() != 1 || static_cast<Eigen::Index>(q.rows()) != targets.rows()) {
    throw DimensionError("pac_critic_loss: predictions " + shape_string(q.value()) + " vs targets " +
                         shape_string(targets));
  }
  Tape& tape = *q.tape();
  PacLoss out;
  DiffArray total = tape.constant(0.0);

  DiffArray fit = mean(square(q - tape.constant(targets)));
  out.data_fit = fit.item();
  if (terms.data_fit) total = total + fit;

  DiffArray penalty = sqrt_op(scale(kl, 1.0 / static_cast<double>(buffer_size)));
  out.complexity = penalty.item();
  if (terms.complexity) total = total + penalty;

  DiffArray var = empirical_variance(q);
  out.variance = var.item();
  if (terms.correction) total = total - scale(var, gamma * xi);

  out.total = total;
  return out;
}

Matrix soft_bellman_targets(const Matrix& rewards, const Matrix& terminals, const Matrix& next_q,
                            const Matrix& next_log_prob, double alpha, double gamma) {
  if (rewards.cols() != 1 || terminals.rows() != rewards.rows() || next_q.rows() != rewards.rows() ||
      next_log_prob.rows() != rewards.rows() || terminals.cols() != 1 || next_q.cols() != 1 ||
      next_log_prob.cols() != 1) {
    throw DimensionError("soft_bellman_targets: inputs must all be [" + std::to_string(rewards.rows()) + "x1]");
  }
  const auto continues = (1.0 - terminals.array());
  return (rewards.array() + continues * gamma * (next_q.array() - alpha * next_log_prob.array())).matrix();
}

DiffArray policy_improvement_loss(const DiffArray& log_prob, const DiffArray& q, double alpha, bool entropy_term) {
  if (!entropy_term) return mean(neg(q));
  return mean(scale(log_prob, alpha) - q);
}

}  // namespace pacsac::agents
