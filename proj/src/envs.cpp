#include "pacsac/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pacsac::envs {

namespace {

constexpr double kPi = std::numbers::pi;

double first_action(std::span<const double> action, const EnvSpec& spec) {
  if (action.size() != spec.action_dim) {
    throw DimensionError(spec.name + ": action has " + std::to_string(action.size()) + " entries, expected " +
                         std::to_string(spec.action_dim));
  }
  return std::clamp(action[0], spec.action_low[0], spec.action_high[0]);
}

}  // namespace

double wrap_angle(double theta) {
  double t = std::fmod(theta + kPi, 2.0 * kPi);
  if (t < 0.0) t += 2.0 * kPi;
  t -= kPi;
  return t == -kPi ? kPi : t;
}

Pendulum::Pendulum() {
  spec_.name = "pendulum";
  spec_.state_dim = 3;
  spec_.action_dim = 1;
  spec_.action_low = {-kMaxTorque};
  spec_.action_high = {kMaxTorque};
  spec_.reward_min = -(kPi * kPi + 0.1 * kMaxSpeed * kMaxSpeed + 0.001 * kMaxTorque * kMaxTorque);
  spec_.reward_max = 0.0;
  spec_.max_episode_steps = kMaxSteps;
}

std::vector<double> Pendulum::reset(RandomStream& rng) {
  theta_ = rng.uniform(-kPi, kPi);
  theta_dot_ = rng.uniform(-1.0, 1.0);
  steps_ = 0;
  done_ = false;
  return observation();
}

void Pendulum::set_state(double theta, double theta_dot) {
  theta_ = theta;
  theta_dot_ = theta_dot;
  steps_ = 0;
  done_ = false;
}

StepResult Pendulum::step(std::span<const double> action) {
  if (done_) throw ContractError("pendulum: step() after episode end; call reset()");
  const double u = first_action(action, spec_);
  const double th = wrap_angle(theta_);
  const double reward = -(th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u);

  const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) + 3.0 / (kMass * kLength * kLength) * u;
  theta_dot_ = std::clamp(theta_dot_ + accel * kDt, -kMaxSpeed, kMaxSpeed);
  theta_ = theta_ + theta_dot_ * kDt;
  ++steps_;

  StepResult r;
  r.reward = reward;
  r.truncated = steps_ >= kMaxSteps;
  done_ = r.truncated;
  r.observation = observation();
  return r;
}

std::vector<double> Pendulum::observation() const { return {std::cos(theta_), std::sin(theta_), theta_dot_}; }

CartpoleSwingup::CartpoleSwingup() {
  spec_.name = "cartpole-swingup";
  spec_.state_dim = 5;
  spec_.action_dim = 1;
  spec_.action_low = {-1.0};
  spec_.action_high = {1.0};
  spec_.reward_min = -1.0;
  spec_.reward_max = 1.0;
  spec_.max_episode_steps = kMaxSteps;
}

std::vector<double> CartpoleSwingup::reset(RandomStream& rng) {
  x_ = 0.0;
  x_dot_ = 0.0;
  theta_ = kPi + rng.uniform(-0.05, 0.05);
  theta_dot_ = rng.uniform(-0.05, 0.05);
  steps_ = 0;
  done_ = false;
  return observation();
}

void CartpoleSwingup::set_state(double x, double x_dot, double theta, double theta_dot) {
  x_ = x;
  x_dot_ = x_dot;
  theta_ = theta;
  theta_dot_ = theta_dot;
  steps_ = 0;
  done_ = false;
}

StepResult CartpoleSwingup::step(std::span<const double> action) {
  if (done_) throw ContractError("cartpole-swingup: step() after episode end; call reset()");
  const double force = kForceScale * first_action(action, spec_);

  const double total_mass = kCartMass + kPoleMass;
  const double pole_ml = kPoleMass * kHalfLength;
  const double s = std::sin(theta_);
  const double c = std::cos(theta_);
  const double temp = (force + pole_ml * theta_dot_ * theta_dot_ * s) / total_mass;
  const double theta_acc = (kGravity * s - c * temp) / (kHalfLength * (4.0 / 3.0 - kPoleMass * c * c / total_mass));
  const double x_acc = temp - pole_ml * theta_acc * c / total_mass;

  x_ += kDt * x_dot_;
  x_dot_ = std::clamp(x_dot_ + kDt * x_acc, -kMaxCartSpeed, kMaxCartSpeed);
  theta_ += kDt * theta_dot_;
  theta_dot_ = std::clamp(theta_dot_ + kDt * theta_acc, -kMaxPoleSpeed, kMaxPoleSpeed);
  ++steps_;

  StepResult r;
  r.reward = std::cos(theta_);
  r.terminal = std::abs(x_) > kTrackLimit;
  r.truncated = !r.terminal && steps_ >= kMaxSteps;
  done_ = r.terminal || r.truncated;
  r.observation = observation();
  return r;
}

std::vector<double> CartpoleSwingup::observation() const {
  return {x_, x_dot_, std::cos(theta_), std::sin(theta_), theta_dot_};
}

std::unique_ptr<Environment> make_environment(std::string_view name) {
  if (name == "pendulum") return std::make_unique<Pendulum>();
  if (name == "cartpole-swingup") return std::make_unique<CartpoleSwingup>();
  throw std::invalid_argument("unknown environment '" + std::string(name) + "' (expected pendulum or cartpole-swingup)");
}

std::vector<std::string> environment_names() { return {"pendulum", "cartpole-swingup"}; }

}  // namespace pacsac::envs
