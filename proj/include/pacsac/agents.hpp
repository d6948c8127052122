#ifndef PACSAC_AGENTS_HPP
#define PACSAC_AGENTS_HPP

#include "pacsac/envs.hpp"
#include "pacsac/losses.hpp"
#include "pacsac/nets.hpp"
#include "pacsac/optim.hpp"
#include "pacsac/replay.hpp"
#include "pacsac/rng.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pacsac::agents {

enum class Algorithm { kPac4Sac, kSac };

std::string to_string(Algorithm algo);
/// "pac4sac" or "sac"; throws std::invalid_argument otherwise.
Algorithm parse_algorithm(const std::string& name);

struct TrainingConfig {
  double gamma = 0.99;
  double alpha = 0.2;
  double tau = 0.005;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  /// Actor samples scored by the critic per environment step (R).
  std::size_t search_samples = 500;
  /// Overestimation-correction coefficient.
  double xi = 0.01;
  double prior_std = 1.0;
  double init_log_std = -5.0;
  std::size_t total_steps = 10000;
  std::size_t warmup_steps = 1000;
  std::size_t buffer_capacity = 25000;
  LossTerms terms;
  /// Keep -alpha log pi in the actor loss.
  bool actor_entropy_term = true;
  std::size_t hidden_width = 256;
  bool layer_norm_affine = true;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first out-of-range field.
  void validate() const;
};

struct StepReport {
  std::size_t env_step = 0;
  std::vector<double> action;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
  bool episode_done = false;
  /// Return and length of the episode that just finished (episode_done only).
  double episode_reward = 0.0;
  std::size_t episode_length = 0;
  bool updated = false;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double data_fit = 0.0;
  double kl = 0.0;
  double variance = 0.0;

  bool operator==(const StepReport&) const = default;
};

struct UpdateReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double data_fit = 0.0;
  double kl = 0.0;
  double variance = 0.0;
};

/// Chosen candidate of a critic-guided search.
struct SearchResult {
  std::vector<double> action;
  std::size_t chosen = 0;
  Matrix candidates;  // [R x d_a]
  Matrix scores;      // [R x 1], empty when R == 1
};

/// Index of the largest score; the first wins ties.
std::size_t best_candidate(const Matrix& scores);

/// Draws R actions from the actor and R weight samples from the critic
/// posterior, pairs them and returns the highest-scoring action. With R == 1
/// the single actor sample is returned and no critic noise is drawn.
SearchResult random_action_search(nets::SquashedGaussianPolicy& actor, nets::CriticNet& critic,
                                  std::span<const double> state, std::size_t samples, RandomStream& actor_noise,
                                  RandomStream& critic_noise);

/// Shared actor, replay buffer, random streams and episode bookkeeping.
/// train_step() runs one environment interaction followed, after warmup, by
/// one update.
class Agent {
 public:
  Agent(const envs::EnvSpec& spec, const TrainingConfig& config);
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  StepReport train_step(envs::Environment& env);

  /// Exploration action for `state` after warmup.
  virtual std::vector<double> act(std::span<const double> state) = 0;
  /// Soft Bellman targets for a batch, detached.
  virtual Matrix bellman_targets(const replay::Batch& batch) = 0;
  /// Critic update, actor update, target update.
  virtual UpdateReport update(const replay::Batch& batch) = 0;
  /// Every array of the agent, including target networks.
  virtual std::vector<diff::Parameter*> parameters() = 0;

  nets::SquashedGaussianPolicy& actor() { return actor_; }
  replay::ReplayBuffer& buffer() { return buffer_; }
  const TrainingConfig& config() const { return config_; }
  const envs::EnvSpec& spec() const { return spec_; }
  std::size_t env_steps() const { return steps_; }

 protected:
  std::vector<double> uniform_action();

  TrainingConfig config_;
  envs::EnvSpec spec_;
  RandomStream init_rng_;
  RandomStream env_rng_;
  RandomStream actor_rng_;
  RandomStream critic_rng_;
  RandomStream buffer_rng_;
  nets::SquashedGaussianPolicy actor_;
  diff::Adam actor_opt_;
  replay::ReplayBuffer buffer_;

 private:
  std::optional<std::vector<double>> observation_;
  double episode_reward_ = 0.0;
  std::size_t episode_length_ = 0;
  std::size_t steps_ = 0;
};

/// Single probabilistic critic trained on the PAC-Bayes loss, acting by
/// critic-guided random search.
class Pac4SacAgent final : public Agent {
 public:
  Pac4SacAgent(const envs::EnvSpec& spec, const TrainingConfig& config);

  std::vector<double> act(std::span<const double> state) override;
  Matrix bellman_targets(const replay::Batch& batch) override;
  UpdateReport update(const replay::Batch& batch) override;
  std::vector<diff::Parameter*> parameters() override;

  SearchResult search(std::span<const double> state);

  nets::CriticNet& critic() { return critic_; }
  nets::CriticNet& target_critic() { return target_critic_; }

 private:
  nets::CriticNet critic_;
  nets::CriticNet target_critic_;
  diff::Adam critic_opt_;
};

/// Twin deterministic critics with twin Polyak targets; min of the pair for
/// targets and for the actor objective.
class SacAgent final : public Agent {
 public:
  SacAgent(const envs::EnvSpec& spec, const TrainingConfig& config);

  std::vector<double> act(std::span<const double> state) override;
  Matrix bellman_targets(const replay::Batch& batch) override;
  UpdateReport update(const replay::Batch& batch) override;
  std::vector<diff::Parameter*> parameters() override;

  nets::CriticNet& critic(std::size_t i) { return i == 0 ? critic1_ : critic2_; }
  nets::CriticNet& target_critic(std::size_t i) { return i == 0 ? target1_ : target2_; }

 private:
  nets::CriticNet critic1_;
  nets::CriticNet critic2_;
  nets::CriticNet target1_;
  nets::CriticNet target2_;
  diff::Adam critic1_opt_;
  diff::Adam critic2_opt_;
};

std::unique_ptr<Agent> make_agent(Algorithm algo, const envs::EnvSpec& spec, const TrainingConfig& config);

/// One PAC4SAC iteration: act, store, critic, actor and target updates.
StepReport train_step(Pac4SacAgent& agent, envs::Environment& env);
/// One twin-critic SAC iteration.
StepReport sac_baseline_step(SacAgent& agent, envs::Environment& env);

}  // namespace pacsac::agents

#endif  // PACSAC_AGENTS_HPP
