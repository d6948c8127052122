#ifndef PACSAC_ENVS_HPP
#define PACSAC_ENVS_HPP

#include "pacsac/rng.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pacsac::envs {

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  double reward_min = 0.0;
  double reward_max = 0.0;
  std::size_t max_episode_steps = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  /// Absorbing state reached; bootstrapping stops here.
  bool terminal = false;
  /// Time limit hit; the state is not absorbing.
  bool truncated = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(RandomStream& rng) = 0;
  /// Actions outside the box are clipped. Throws ContractError when called
  /// after a terminal or truncated step without reset().
  virtual StepResult step(std::span<const double> action) = 0;
  virtual std::vector<double> observation() const = 0;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

/// Torque-limited pendulum, theta = 0 upright.
class Pendulum final : public Environment {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr std::size_t kMaxSteps = 200;

  Pendulum();

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(RandomStream& rng) override;
  StepResult step(std::span<const double> action) override;
  std::vector<double> observation() const override;

  /// Places the pendulum at a given state and restarts the step counter.
  void set_state(double theta, double theta_dot);
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }

 private:
  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

/// Cart-pole started hanging down, rewarded by cos(theta), theta = 0 upright.
/// Velocities are clamped to |x_dot| <= 10 and |theta_dot| <= 20.
class CartpoleSwingup final : public Environment {
 public:
  static constexpr double kDt = 0.02;
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForceScale = 10.0;
  static constexpr double kTrackLimit = 2.4;
  static constexpr double kMaxCartSpeed = 10.0;
  static constexpr double kMaxPoleSpeed = 20.0;
  static constexpr std::size_t kMaxSteps = 500;

  CartpoleSwingup();

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(RandomStream& rng) override;
  StepResult step(std::span<const double> action) override;
  std::vector<double> observation() const override;

  void set_state(double x, double x_dot, double theta, double theta_dot);
  double theta() const { return theta_; }
  double x() const { return x_; }

 private:
  EnvSpec spec_;
  double x_ = 0.0;
  double x_dot_ = 0.0;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

/// "pendulum" or "cartpole-swingup"; throws std::invalid_argument otherwise.
std::unique_ptr<Environment> make_environment(std::string_view name);
std::vector<std::string> environment_names();

}  // namespace pacsac::envs

#endif  // PACSAC_ENVS_HPP
