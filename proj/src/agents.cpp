#include "pacsac/agents.hpp"

#include <stdexcept>

namespace pacsac::agents {

using diff::Tape;
using nets::Track;

namespace {

nets::TrunkOptions trunk_options(const TrainingConfig& c) {
  nets::TrunkOptions t;
  t.width = c.hidden_width;
  t.layer_norm_affine = c.layer_norm_affine;
  return t;
}

nets::CriticOptions critic_options(const TrainingConfig& c, nets::CriticHead head) {
  nets::CriticOptions o;
  o.trunk = trunk_options(c);
  o.head = head;
  o.gaussian.prior_std = c.prior_std;
  o.gaussian.init_log_std = c.init_log_std;
  return o;
}

nets::PolicyOptions policy_options(const TrainingConfig& c) {
  nets::PolicyOptions o;
  o.trunk = trunk_options(c);
  return o;
}

diff::AdamOptions adam_options(const TrainingConfig& c) {
  diff::AdamOptions o;
  o.learning_rate = c.learning_rate;
  return o;
}

Matrix row_of(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

std::vector<double> vector_of_row(const Matrix& m, Eigen::Index row) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(j)] = m(row, j);
  return v;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("TrainingConfig: ") + what);
}

// Gradient step on `params` for a scalar loss recorded on `tape`.
void descend(Tape& tape, const DiffArray& loss, const std::vector<diff::Parameter*>& params, diff::Adam& opt) {
  diff::zero_grad(params);
  tape.backward(loss);
  opt.step(params);
}

}  // namespace

std::string to_string(Algorithm algo) { return algo == Algorithm::kPac4Sac ? "pac4sac" : "sac"; }

Algorithm parse_algorithm(const std::string& name) {
  if (name == "pac4sac") return Algorithm::kPac4Sac;
  if (name == "sac") return Algorithm::kSac;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected pac4sac or sac)");
}

void TrainingConfig::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(alpha > 0.0, "alpha must be positive");
  require(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
  require(learning_rate >= 0.0, "learning_rate must be non-negative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(search_samples >= 1, "search_samples must be at least 1");
  require(xi > 0.0 && xi <= 1.0, "xi must lie in (0, 1]");
  require(prior_std > 0.0, "prior_std must be positive");
  require(buffer_capacity >= 1, "buffer_capacity must be at least 1");
  require(hidden_width >= 1, "hidden_width must be at least 1");
  require(terms.data_fit, "the data-fit term cannot be disabled");
}

std::size_t best_candidate(const Matrix& scores) {
  if (scores.size() == 0) throw ContractError("best_candidate: no scores");
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

SearchResult random_action_search(nets::SquashedGaussianPolicy& actor, nets::CriticNet& critic,
                                  std::span<const double> state, std::size_t samples, RandomStream& actor_noise,
                                  RandomStream& critic_noise) {
  if (samples == 0) throw ContractError("random_action_search: R must be at least 1");
  Tape tape;
  const Matrix s = row_of(state);
  Matrix noise = actor_noise.normal_matrix(samples, actor.action_dim());
  auto drawn = actor.sample_repeated(tape, tape.constant(s), noise, Track::kFrozen);

  SearchResult out;
  out.candidates = drawn.action.value();
  if (samples == 1) {
    out.action = vector_of_row(out.candidates, 0);
    return out;
  }
  const Matrix states = s.replicate(static_cast<Eigen::Index>(samples), 1);
  Matrix weights = critic_noise.normal_matrix(samples, critic.sample_width());
  DiffArray q = critic.forward_sampled(tape, tape.constant(states), tape.constant(out.candidates), weights,
                                       Track::kFrozen);
  out.scores = q.value();
  out.chosen = best_candidate(out.scores);
  out.action = vector_of_row(out.candidates, static_cast<Eigen::Index>(out.chosen));
  return out;
}

// ---------------------------------------------------------------------------

Agent::Agent(const envs::EnvSpec& spec, const TrainingConfig& config)
    : config_((config.validate(), config)),
      spec_(spec),
      init_rng_(config.seed, "init"),
      env_rng_(config.seed, "env"),
      actor_rng_(config.seed, "actor-noise"),
      critic_rng_(config.seed, "critic-noise"),
      buffer_rng_(config.seed, "buffer"),
      actor_(spec.state_dim, spec.action_low, spec.action_high, policy_options(config), init_rng_),
      actor_opt_(adam_options(config)),
      buffer_(config.buffer_capacity, spec.state_dim, spec.action_dim) {}

std::vector<double> Agent::uniform_action() {
  std::vector<double> a(spec_.action_dim);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = env_rng_.uniform(spec_.action_low[i], spec_.action_high[i]);
  return a;
}

StepReport Agent::train_step(envs::Environment& env) {
  if (!observation_) {
    observation_ = env.reset(env_rng_);
    episode_reward_ = 0.0;
    episode_length_ = 0;
  }
  StepReport report;
  const bool warming = steps_ < config_.warmup_steps;
  report.action = warming ? uniform_action() : act(*observation_);

  envs::StepResult r = env.step(report.action);
  ++steps_;
  ++episode_length_;
  episode_reward_ += r.reward;
  buffer_.push({*observation_, report.action, r.reward, r.observation, r.terminal});

  report.env_step = steps_;
  report.reward = r.reward;
  report.terminal = r.terminal;
  report.truncated = r.truncated;

  if (!warming) {
    replay::Batch batch = buffer_.sample(config_.batch_size, buffer_rng_);
    UpdateReport u = update(batch);
    report.updated = true;
    report.critic_loss = u.critic_loss;
    report.actor_loss = u.actor_loss;
    report.data_fit = u.data_fit;
    report.kl = u.kl;
    report.variance = u.variance;
  }

  if (r.terminal || r.truncated) {
    report.episode_done = true;
    report.episode_reward = episode_reward_;
    report.episode_length = episode_length_;
    observation_.reset();
  } else {
    observation_ = std::move(r.observation);
  }
  return report;
}

// ---------------------------------------------------------------------------

Pac4SacAgent::Pac4SacAgent(const envs::EnvSpec& spec, const TrainingConfig& config)
    : Agent(spec, config),
      critic_("critic", spec.state_dim, spec.action_dim, critic_options(config, nets::CriticHead::kGaussian), init_rng_),
      target_critic_("target_critic", spec.state_dim, spec.action_dim,
                     critic_options(config, nets::CriticHead::kGaussian), init_rng_),
      critic_opt_(adam_options(config)) {
  diff::copy_values(target_critic_.parameters(), critic_.parameters());
}

SearchResult Pac4SacAgent::search(std::span<const double> state) {
  return random_action_search(actor_, critic_, state, config_.search_samples, actor_rng_, critic_rng_);
}

std::vector<double> Pac4SacAgent::act(std::span<const double> state) { return search(state).action; }

Matrix Pac4SacAgent::bellman_targets(const replay::Batch& batch) {
  Tape tape;
  const auto m = batch.size();
  auto next = actor_.sample(tape, tape.constant(batch.next_states), actor_rng_.normal_matrix(m, spec_.action_dim),
                            Track::kFrozen);
  Matrix noise = critic_rng_.normal_matrix(m, target_critic_.sample_width());
  DiffArray q = target_critic_.forward_sampled(tape, tape.constant(batch.next_states), next.action, noise,
                                               Track::kFrozen);
  return soft_bellman_targets(batch.rewards, batch.terminals, q.value(), next.log_prob.value(), config_.alpha,
                              config_.gamma);
}

UpdateReport Pac4SacAgent::update(const replay::Batch& batch) {
  UpdateReport out;
  const auto m = batch.size();
  const Matrix targets = bellman_targets(batch);
  {
    Tape tape;
    Matrix noise = critic_rng_.normal_matrix(m, critic_.sample_width());
    DiffArray q = critic_.forward_sampled(tape, tape.constant(batch.states), tape.constant(batch.actions), noise,
                                          Track::kTrainable);
    DiffArray kl = critic_.kl_to_prior(tape, Track::kTrainable);
    PacLoss loss = pac_critic_loss(q, targets, kl, buffer_.size(), config_.gamma, config_.xi, config_.terms);
    descend(tape, loss.total, critic_.parameters(), critic_opt_);
    out.critic_loss = loss.total.item();
    out.data_fit = loss.data_fit;
    out.kl = kl.item();
    out.variance = loss.variance;
  }
  {
    Tape tape;
    DiffArray s = tape.constant(batch.states);
    auto pi = actor_.sample(tape, s, actor_rng_.normal_matrix(m, spec_.action_dim), Track::kTrainable);
    Matrix noise = critic_rng_.normal_matrix(m, critic_.sample_width());
    DiffArray q = critic_.forward_sampled(tape, s, pi.action, noise, Track::kFrozen);
    DiffArray loss = policy_improvement_loss(pi.log_prob, q, config_.alpha, config_.actor_entropy_term);
    descend(tape, loss, actor_.parameters(), actor_opt_);
    out.actor_loss = loss.item();
  }
  diff::polyak_update(target_critic_.parameters(), critic_.parameters(), config_.tau);
  return out;
}

std::vector<diff::Parameter*> Pac4SacAgent::parameters() {
  std::vector<diff::Parameter*> all = actor_.parameters();
  for (auto* p : critic_.parameters()) all.push_back(p);
  for (auto* p : target_critic_.parameters()) all.push_back(p);
  return all;
}

// ---------------------------------------------------------------------------

SacAgent::SacAgent(const envs::EnvSpec& spec, const TrainingConfig& config)
    : Agent(spec, config),
      critic1_("critic1", spec.state_dim, spec.action_dim, critic_options(config, nets::CriticHead::kDeterministic),
               init_rng_),
      critic2_("critic2", spec.state_dim, spec.action_dim, critic_options(config, nets::CriticHead::kDeterministic),
               init_rng_),
      target1_("target_critic1", spec.state_dim, spec.action_dim,
               critic_options(config, nets::CriticHead::kDeterministic), init_rng_),
      target2_("target_critic2", spec.state_dim, spec.action_dim,
               critic_options(config, nets::CriticHead::kDeterministic), init_rng_),
      critic1_opt_(adam_options(config)),
      critic2_opt_(adam_options(config)) {
  diff::copy_values(target1_.parameters(), critic1_.parameters());
  diff::copy_values(target2_.parameters(), critic2_.parameters());
}

std::vector<double> SacAgent::act(std::span<const double> state) {
  Tape tape;
  auto pi = actor_.sample(tape, tape.constant(row_of(state)), actor_rng_.normal_matrix(1, spec_.action_dim),
                          Track::kFrozen);
  return vector_of_row(pi.action.value(), 0);
}

Matrix SacAgent::bellman_targets(const replay::Batch& batch) {
  Tape tape;
  DiffArray s2 = tape.constant(batch.next_states);
  auto next = actor_.sample(tape, s2, actor_rng_.normal_matrix(batch.size(), spec_.action_dim), Track::kFrozen);
  DiffArray q = minimum(target1_.forward(tape, s2, next.action, Track::kFrozen),
                        target2_.forward(tape, s2, next.action, Track::kFrozen));
  return soft_bellman_targets(batch.rewards, batch.terminals, q.value(), next.log_prob.value(), config_.alpha,
                              config_.gamma);
}

UpdateReport SacAgent::update(const replay::Batch& batch) {
  UpdateReport out;
  const Matrix targets = bellman_targets(batch);
  double total = 0.0;
  for (auto [critic, opt] : {std::pair{&critic1_, &critic1_opt_}, std::pair{&critic2_, &critic2_opt_}}) {
    Tape tape;
    DiffArray q = critic->forward(tape, tape.constant(batch.states), tape.constant(batch.actions), Track::kTrainable);
    DiffArray loss = mean(square(q - tape.constant(targets)));
    descend(tape, loss, critic->parameters(), *opt);
    total += loss.item();
  }
  out.critic_loss = total;
  out.data_fit = total / 2.0;
  {
    Tape tape;
    DiffArray s = tape.constant(batch.states);
    auto pi = actor_.sample(tape, s, actor_rng_.normal_matrix(batch.size(), spec_.action_dim), Track::kTrainable);
    DiffArray q = minimum(critic1_.forward(tape, s, pi.action, Track::kFrozen),
                          critic2_.forward(tape, s, pi.action, Track::kFrozen));
    DiffArray loss = policy_improvement_loss(pi.log_prob, q, config_.alpha, config_.actor_entropy_term);
    descend(tape, loss, actor_.parameters(), actor_opt_);
    out.actor_loss = loss.item();
  }
  diff::polyak_update(target1_.parameters(), critic1_.parameters(), config_.tau);
  diff::polyak_update(target2_.parameters(), critic2_.parameters(), config_.tau);
  return out;
}

std::vector<diff::Parameter*> SacAgent::parameters() {
  std::vector<diff::Parameter*> all = actor_.parameters();
  for (auto* net : {&critic1_, &critic2_, &target1_, &target2_}) {
    for (auto* p : net->parameters()) all.push_back(p);
  }
  return all;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Agent> make_agent(Algorithm algo, const envs::EnvSpec& spec, const TrainingConfig& config) {
  if (algo == Algorithm::kPac4Sac) return std::make_unique<Pac4SacAgent>(spec, config);
  return std::make_unique<SacAgent>(spec, config);
}

StepReport train_step(Pac4SacAgent& agent, envs::Environment& env) { return agent.train_step(env); }

StepReport sac_baseline_step(SacAgent& agent, envs::Environment& env) { return agent.train_step(env); }

}  // namespace pacsac::agents
