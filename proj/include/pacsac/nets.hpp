#ifndef PACSAC_NETS_HPP
#define PACSAC_NETS_HPP

#include "pacsac/diffmath.hpp"
#include "pacsac/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pacsac::nets {

using diff::DiffArray;
using diff::Parameter;
using diff::Tape;

/// Whether a forward pass binds parameters as gradient sinks or as constants.
enum class Track { kTrainable, kFrozen };

DiffArray bind(Tape& tape, Parameter& p, Track track);

/// y = x W + b with W [in x out], b [1 x out]; fan-in uniform initialization.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, RandomStream& init);

  DiffArray forward(Tape& tape, const DiffArray& x, Track track);
  std::vector<Parameter*> parameters();

  std::size_t in_features() const { return weight_.value.rows(); }
  std::size_t out_features() const { return weight_.value.cols(); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
};

/// Row-wise normalization with optional learned gain and bias.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t width, bool affine, double eps = 1e-5);

  DiffArray forward(Tape& tape, const DiffArray& x, Track track);
  std::vector<Parameter*> parameters();

 private:
  bool affine_ = true;
  double eps_ = 1e-5;
  Parameter gain_;
  Parameter bias_;
};

struct TrunkOptions {
  std::size_t width = 256;
  std::size_t blocks = 3;
  bool layer_norm_affine = true;
  double layer_norm_eps = 1e-5;
};

/// Stack of (Linear, LayerNorm, SiLU) blocks.
class MlpTrunk {
 public:
  MlpTrunk() = default;
  MlpTrunk(const std::string& name, std::size_t in, const TrunkOptions& options, RandomStream& init);

  DiffArray forward(Tape& tape, const DiffArray& x, Track track);
  std::vector<Parameter*> parameters();
  std::size_t out_features() const { return width_; }

 private:
  std::size_t width_ = 0;
  std::vector<Linear> linears_;
  std::vector<LayerNorm> norms_;
};

struct PolicyOptions {
  TrunkOptions trunk;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
};

struct PolicySample {
  DiffArray action;    // [batch x d_a]
  DiffArray log_prob;  // [batch x 1]
  DiffArray mean;      // pre-squash mean [batch x d_a]
  DiffArray log_std;   // clamped [batch x d_a]
};

/// Squashed Gaussian actor: trunk -> Linear(width, 2 d_a) -> (mean, log-std),
/// action = scale * tanh(mean + std * noise) + offset.
class SquashedGaussianPolicy {
 public:
  /// Additive constant inside the squash-correction log.
  static constexpr double kSquashEpsilon = 1e-6;
  /// Pre-squash values are clamped to +-kMaxPreSquash so tanh stays below 1.
  static constexpr double kMaxPreSquash = 15.0;

  SquashedGaussianPolicy() = default;
  SquashedGaussianPolicy(std::size_t state_dim, std::vector<double> action_low, std::vector<double> action_high,
                         const PolicyOptions& options, RandomStream& init);

  /// Reparameterized sample; `noise` is standard normal [batch x d_a].
  PolicySample sample(Tape& tape, const DiffArray& state, const Matrix& noise, Track track);
  /// Samples `noise.rows()` actions for a single state [1 x d_s], running the
  /// trunk once.
  PolicySample sample_repeated(Tape& tape, const DiffArray& state, const Matrix& noise, Track track);
  /// Log-density of given in-box actions under the same squash convention.
  DiffArray log_density(Tape& tape, const DiffArray& state, const Matrix& action, Track track);
  /// scale * tanh(mean) + offset for a batch of states.
  Matrix mean_action(const Matrix& state);

  std::vector<Parameter*> parameters();
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return scale_.cols(); }
  const Matrix& action_scale() const { return scale_; }
  const Matrix& action_offset() const { return offset_; }
  Linear& head() { return head_; }

 private:
  // (mean, clamped log-std) for each state row.
  std::pair<DiffArray, DiffArray> head_outputs(Tape& tape, const DiffArray& state, Track track);
  PolicySample squash(Tape& tape, const DiffArray& mean, const DiffArray& log_std, const Matrix& noise);

  std::size_t state_dim_ = 0;
  PolicyOptions options_;
  MlpTrunk trunk_;
  Linear head_;
  Matrix scale_;   // [1 x d_a]
  Matrix offset_;  // [1 x d_a]
};

struct GaussianLinearOptions {
  double prior_std = 1.0;
  double init_log_std = -5.0;
};

/// Fully connected layer (out width 1) whose weights and bias have independent
/// normal posteriors q = N(mean, exp(log_std)^2) and prior N(0, prior_std^2).
class GaussianLinear {
 public:
  GaussianLinear() = default;
  GaussianLinear(const std::string& name, std::size_t in, const GaussianLinearOptions& options, RandomStream& init);

  /// Forward pass with the posterior means.
  DiffArray forward_mean(Tape& tape, const DiffArray& x, Track track);
  /// One weight draw per row: `noise` is [batch x (in + 1)], last column for
  /// the bias.
  DiffArray forward_sampled(Tape& tape, const DiffArray& x, const Matrix& noise, Track track);

  /// Closed-form KL(q || p0) summed over weights and bias.
  double kl_to_prior() const;
  DiffArray kl_to_prior(Tape& tape, Track track);

  std::vector<Parameter*> parameters();
  std::size_t in_features() const { return weight_mean_.value.rows(); }
  /// Number of random scalars per draw (weights + bias).
  std::size_t sample_width() const { return in_features() + 1; }
  double prior_std() const { return prior_std_; }

  Parameter& weight_mean() { return weight_mean_; }
  Parameter& weight_log_std() { return weight_log_std_; }
  Parameter& bias_mean() { return bias_mean_; }
  Parameter& bias_log_std() { return bias_log_std_; }

 private:
  double prior_std_ = 1.0;
  Parameter weight_mean_;     // [in x 1]
  Parameter weight_log_std_;  // [in x 1]
  Parameter bias_mean_;       // [1 x 1]
  Parameter bias_log_std_;    // [1 x 1]
};

enum class CriticHead { kDeterministic, kGaussian };

struct CriticOptions {
  TrunkOptions trunk;
  CriticHead head = CriticHead::kDeterministic;
  GaussianLinearOptions gaussian;
};

/// Q(s, a): trunk over the concatenated state-action, scalar head.
class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(const std::string& name, std::size_t state_dim, std::size_t action_dim, const CriticOptions& options,
            RandomStream& init);

  /// Output [batch x 1]. A Gaussian head uses its posterior means.
  DiffArray forward(Tape& tape, const DiffArray& state, const DiffArray& action, Track track);
  /// One posterior weight draw per row. Throws ContractError for a
  /// deterministic head or a noise block of the wrong shape.
  DiffArray forward_sampled(Tape& tape, const DiffArray& state, const DiffArray& action, const Matrix& noise,
                            Track track);

  bool probabilistic() const { return gaussian_.has_value(); }
  std::size_t sample_width() const;
  GaussianLinear& gaussian_head();
  double kl_to_prior() const;
  DiffArray kl_to_prior(Tape& tape, Track track);

  std::vector<Parameter*> parameters();

 private:
  MlpTrunk trunk_;
  std::optional<Linear> linear_;
  std::optional<GaussianLinear> gaussian_;
};

}  // namespace pacsac::nets

#endif  // PACSAC_NETS_HPP
