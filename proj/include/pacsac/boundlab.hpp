#ifndef PACSAC_BOUNDLAB_HPP
#define PACSAC_BOUNDLAB_HPP

#include "pacsac/diffmath.hpp"
#include "pacsac/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacsac::boundlab {

class DegenerateChainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when N is too small for the bound's denominator to be positive.
class SampleSizeError : public std::invalid_argument {
 public:
  SampleSizeError(const std::string& what, double minimum_n) : std::invalid_argument(what), minimum_n_(minimum_n) {}
  double minimum_n() const { return minimum_n_; }

 private:
  double minimum_n_;
};

/// Explicit finite MDP. transitions[(s * A + a) * S + s2] = p(s2 | s, a).
struct FiniteMDP {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transitions;
  Matrix rewards;  // [S x A]
  double gamma = 0.9;
  double r_min = 0.0;
  double r_max = 0.0;

  double p(std::size_t s, std::size_t a, std::size_t s2) const { return transitions[(s * n_actions + a) * n_states + s2]; }
  double& p(std::size_t s, std::size_t a, std::size_t s2) { return transitions[(s * n_actions + a) * n_states + s2]; }

  /// Throws ContractError on non-stochastic rows (tolerance 1e-12), out-of-
  /// range rewards or gamma outside (0, 1).
  void validate() const;
};

/// probs(s, a) = pi(a | s); rows sum to one.
struct TabularPolicy {
  Matrix probs;

  std::size_t n_states() const { return probs.rows(); }
  std::size_t n_actions() const { return probs.cols(); }
  void validate() const;
};

/// (T q)(s, a) = r(s, a) + gamma * E_{s'} sum_a' pi(a'|s') (q(s', a') - alpha log pi(a'|s')).
Matrix soft_backup(const FiniteMDP& mdp, const TabularPolicy& pi, const Matrix& q, double alpha);

/// sum_a pi(a|s) (q(s, a) - alpha log pi(a|s)) for every state.
Eigen::VectorXd soft_state_value(const TabularPolicy& pi, const Matrix& q, double alpha);

/// Fixed point of soft_backup by iteration, to a sup-norm residual below
/// 1e-12 * max(1, |Q|_inf).
Matrix exact_soft_q(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha);

/// Same MDP with r(s, a) replaced by r(s, a) - gamma alpha E_{s'}[sum pi log pi],
/// so that classical evaluation of `pi` there gives the soft Q of `pi` here.
FiniteMDP entropy_adjusted(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha);

/// Classical state values of `pi` by a direct linear solve.
Eigen::VectorXd state_values(const FiniteMDP& mdp, const TabularPolicy& pi);

/// Row-stochastic [S x S] chain induced by the policy.
Matrix induced_chain(const FiniteMDP& mdp, const TabularPolicy& pi);

/// Power iteration from the uniform distribution to an L1 step change below
/// 1e-12. Throws DegenerateChainError after 10^6 iterations.
Eigen::VectorXd stationary_distribution(const FiniteMDP& mdp, const TabularPolicy& pi);

struct Lemma1Result {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// lhs = ||q_hat - Q^pi||^2 and rhs = ||T q_hat - q_hat||^2 / (1 - gamma)^2,
/// both weighted by d(s) pi(a|s) with d the stationary distribution.
Lemma1Result check_lemma1(const FiniteMDP& mdp, const TabularPolicy& pi, const Matrix& q_hat, double alpha);

/// Exact distribution of the best-of-R action: R iid draws from pi(.|s), keep
/// the one with the largest q(s, .). Ties go to the lower action index.
TabularPolicy search_policy(const TabularPolicy& pi, const Matrix& q, std::size_t samples);

/// One Monte-Carlo realisation of the search: a deterministic policy.
TabularPolicy sample_search_policy(const TabularPolicy& pi, const Matrix& q, std::size_t samples, RandomStream& rng);

struct PolicyImprovementResult {
  std::size_t samples = 0;
  /// min_s V^{pi^R}(s) - V^pi(s) for the exact search policy.
  double improvement_gap = 0.0;
  /// E_{a ~ pi^R}[Q^pi(s, a)] per state.
  Eigen::VectorXd searched_value;
  /// V^{pi^R} per state, exact search policy.
  Eigen::VectorXd search_value;
  Eigen::VectorXd base_value;
  /// Monte-Carlo trials: mean V over trials and the count of (trial, state)
  /// pairs whose deterministic realisation falls below V^pi - 1e-9.
  std::size_t trials = 0;
  Eigen::VectorXd trial_mean_value;
  std::size_t trial_shortfalls = 0;
  bool holds = false;
};

/// Values are taken in the entropy-adjusted MDP so that V^pi is the soft value
/// of pi and every search policy is scored against the same rewards.
PolicyImprovementResult check_policy_improvement_R(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha,
                                                   std::size_t samples, std::size_t trials, RandomStream& rng);

struct PolicyImprovementSweep {
  std::vector<PolicyImprovementResult> results;
  /// E[Q^pi(s, a*_R)] nondecreasing in R for every state.
  bool searched_monotone = false;
  /// V^{pi^R} nondecreasing in R for every state (reported, not required).
  bool value_monotone = false;
  bool holds = false;
};

/// `sample_counts` must be increasing.
PolicyImprovementSweep sweep_policy_improvement(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha,
                                                const std::vector<std::size_t>& sample_counts, std::size_t trials,
                                                RandomStream& rng);

// --- PAC-Bayes bound ---------------------------------------------------------

/// Reward-range constant B in the bound.
enum class RangeConvention {
  kAbsoluteSum,  // (r_max + |r_min|)^2
  kRange,        // (r_max - r_min)^2
  kQMax,         // Q_max^2
};

struct BoundInputs {
  double empirical_risk = 0.0;
  /// Expected overestimation correction subtracted from the risk.
  double correction = 0.0;
  double kl = 0.0;
  double n = 1.0;
  double r_min = 0.0;
  double r_max = 1.0;
  double delta = 0.05;
  double c1 = 1.0;
  double c2 = 1.0;
  double q_max = 1.0;
};

struct BoundReport {
  double range_constant = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  double complexity = 0.0;
  /// empirical_risk - correction + complexity
  double bound = 0.0;
};

double range_constant(const BoundInputs& in, RangeConvention convention);

/// sqrt((log(c2 N / (c1 B delta)) + kl) / (N / (B c1) - 1)).
double compute_pac_bound(const BoundInputs& in, RangeConvention convention = RangeConvention::kRange);
BoundReport pac_bound_report(const BoundInputs& in, RangeConvention convention = RangeConvention::kRange);

// --- Random instances and counterexamples ------------------------------------

/// Dirichlet(1) transition rows, rewards uniform in [r_min, r_max].
FiniteMDP random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, RandomStream& rng, double r_min = -1.0,
                     double r_max = 1.0);
/// Dirichlet(1) action rows.
TabularPolicy random_policy(std::size_t n_states, std::size_t n_actions, RandomStream& rng);
TabularPolicy uniform_policy(std::size_t n_states, std::size_t n_actions);

struct Counterexample {
  std::string check;
  std::uint64_t seed = 0;
  std::size_t instance = 0;
  FiniteMDP mdp;
  TabularPolicy policy;
  Matrix q_hat;
  double alpha = 0.0;
  std::string detail;
};

void write_counterexample(const std::filesystem::path& path, const Counterexample& c);
Counterexample read_counterexample(const std::filesystem::path& path);

}  // namespace pacsac::boundlab

#endif  // PACSAC_BOUNDLAB_HPP
