#include "pacsac/nets.hpp"

#include <cmath>
#include <algorithm>

namespace pacsac::nets {

using namespace pacsac::diff;

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

void append(std::vector<Parameter*>& out, std::vector<Parameter*> more) {
  out.insert(out.end(), more.begin(), more.end());
}

// [1 x n] -> [rows x n]
DiffArray repeat_rows(Tape& tape, const DiffArray& row, std::size_t rows) {
  return matmul(tape.constant(Matrix::Ones(rows, 1)), row);
}

}  // namespace

DiffArray bind(Tape& tape, Parameter& p, Track track) {
  return track == Track::kTrainable ? tape.parameter(p) : tape.constant(p.value);
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, RandomStream& init) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = Parameter(name + ".weight", init.uniform_matrix(in, out, -bound, bound));
  bias_ = Parameter(name + ".bias", init.uniform_matrix(1, out, -bound, bound));
}

DiffArray Linear::forward(Tape& tape, const DiffArray& x, Track track) {
  return add_row(matmul(x, bind(tape, weight_, track)), bind(tape, bias_, track));
}

std::vector<Parameter*> Linear::parameters() { return {&weight_, &bias_}; }

LayerNorm::LayerNorm(const std::string& name, std::size_t width, bool affine, double eps)
    : affine_(affine), eps_(eps) {
  if (affine_) {
    gain_ = Parameter(name + ".gain", Matrix::Ones(1, width));
    bias_ = Parameter(name + ".bias", Matrix::Zero(1, width));
  }
}

DiffArray LayerNorm::forward(Tape& tape, const DiffArray& x, Track track) {
  DiffArray y = layer_norm(x, eps_);
  if (!affine_) return y;
  return add_row(mul_row(y, bind(tape, gain_, track)), bind(tape, bias_, track));
}

std::vector<Parameter*> LayerNorm::parameters() {
  if (!affine_) return {};
  return {&gain_, &bias_};
}

MlpTrunk::MlpTrunk(const std::string& name, std::size_t in, const TrunkOptions& options, RandomStream& init)
    : width_(options.width) {
  std::size_t fan_in = in;
  for (std::size_t b = 0; b < options.blocks; ++b) {
    const std::string prefix = name + "." + std::to_string(b);
    linears_.emplace_back(prefix + ".linear", fan_in, options.width, init);
    norms_.emplace_back(prefix + ".norm", options.width, options.layer_norm_affine, options.layer_norm_eps);
    fan_in = options.width;
  }
}

DiffArray MlpTrunk::forward(Tape& tape, const DiffArray& x, Track track) {
  DiffArray h = x;
  for (std::size_t b = 0; b < linears_.size(); ++b) {
    h = silu(norms_[b].forward(tape, linears_[b].forward(tape, h, track), track));
  }
  return h;
}

std::vector<Parameter*> MlpTrunk::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t b = 0; b < linears_.size(); ++b) {
    append(out, linears_[b].parameters());
    append(out, norms_[b].parameters());
  }
  return out;
}

SquashedGaussianPolicy::SquashedGaussianPolicy(std::size_t state_dim, std::vector<double> action_low,
                                               std::vector<double> action_high, const PolicyOptions& options,
                                               RandomStream& init)
    : state_dim_(state_dim), options_(options) {
  if (action_low.size() != action_high.size() || action_low.empty()) {
    throw ContractError("SquashedGaussianPolicy: malformed action box");
  }
  const std::size_t da = action_low.size();
  scale_.resize(1, da);
  offset_.resize(1, da);
  for (std::size_t j = 0; j < da; ++j) {
    if (!(action_high[j] > action_low[j])) throw ContractError("SquashedGaussianPolicy: empty action interval");
    scale_(0, j) = 0.5 * (action_high[j] - action_low[j]);
    offset_(0, j) = 0.5 * (action_high[j] + action_low[j]);
  }
  trunk_ = MlpTrunk("actor.trunk", state_dim, options.trunk, init);
  head_ = Linear("actor.head", options.trunk.width, 2 * da, init);
}

std::pair<DiffArray, DiffArray> SquashedGaussianPolicy::head_outputs(Tape& tape, const DiffArray& state,
                                                                     Track track) {
  if (state.cols() != state_dim_) {
    throw DimensionError("policy: state width " + std::to_string(state.cols()) + " != " + std::to_string(state_dim_));
  }
  const std::size_t da = action_dim();
  DiffArray out = head_.forward(tape, trunk_.forward(tape, state, track), track);
  DiffArray mu = slice_cols(out, 0, da);
  DiffArray log_std = clamp(slice_cols(out, da, da), options_.log_std_min, options_.log_std_max);
  return {mu, log_std};
}

PolicySample SquashedGaussianPolicy::squash(Tape& tape, const DiffArray& mu, const DiffArray& log_std,
                                            const Matrix& noise) {
  if (noise.rows() != static_cast<Eigen::Index>(mu.rows()) || noise.cols() != static_cast<Eigen::Index>(mu.cols())) {
    throw DimensionError("policy: noise " + shape_string(noise) + " does not match " + shape_string(mu.value()));
  }
  DiffArray eps = tape.constant(noise);
  DiffArray u = clamp(mu + exp_op(log_std) * eps, -kMaxPreSquash, kMaxPreSquash);
  DiffArray t = tanh_op(u);
  DiffArray scale_row = tape.constant(scale_);
  DiffArray action = add_row(mul_row(t, scale_row), tape.constant(offset_));

  Matrix gauss_const = (-0.5 * noise.array().square() - kHalfLogTwoPi).matrix();
  DiffArray gauss = row_sum(tape.constant(std::move(gauss_const)) - log_std);
  DiffArray jac = mul_row(add_scalar(neg(square(t)), 1.0), scale_row);
  DiffArray correction = row_sum(log_op(add_scalar(jac, kSquashEpsilon)));
  return {action, gauss - correction, mu, log_std};
}

PolicySample SquashedGaussianPolicy::sample(Tape& tape, const DiffArray& state, const Matrix& noise, Track track) {
  auto [mu, log_std] = head_outputs(tape, state, track);
  return squash(tape, mu, log_std, noise);
}

PolicySample SquashedGaussianPolicy::sample_repeated(Tape& tape, const DiffArray& state, const Matrix& noise,
                                                     Track track) {
  if (state.rows() != 1) throw DimensionError("sample_repeated: expected a single state, got " + shape_string(state.value()));
  auto [mu, log_std] = head_outputs(tape, state, track);
  const auto n = static_cast<std::size_t>(noise.rows());
  return squash(tape, repeat_rows(tape, mu, n), repeat_rows(tape, log_std, n), noise);
}

DiffArray SquashedGaussianPolicy::log_density(Tape& tape, const DiffArray& state, const Matrix& action, Track track) {
  auto [mu, log_std] = head_outputs(tape, state, track);
  if (action.rows() != static_cast<Eigen::Index>(mu.rows()) || action.cols() != static_cast<Eigen::Index>(mu.cols())) {
    throw DimensionError("log_density: action " + shape_string(action) + " does not match " + shape_string(mu.value()));
  }
  const double t_max = std::tanh(kMaxPreSquash);
  Matrix t = ((action.rowwise() - offset_.row(0)).array().rowwise() / scale_.row(0).array()).matrix();
  t = t.cwiseMax(-t_max).cwiseMin(t_max);
  Matrix u = t.unaryExpr([](double v) { return std::atanh(v); });
  Matrix correction =
      ((1.0 - t.array().square()).rowwise() * scale_.row(0).array() + kSquashEpsilon).log().rowwise().sum().matrix();

  DiffArray z = (tape.constant(u) - mu) * exp_op(neg(log_std));
  DiffArray gauss = row_sum(add_scalar(scale(square(z), -0.5) - log_std, -kHalfLogTwoPi));
  return gauss - tape.constant(std::move(correction));
}

Matrix SquashedGaussianPolicy::mean_action(const Matrix& state) {
  Tape tape;
  auto [mu, log_std] = head_outputs(tape, tape.constant(state), Track::kFrozen);
  Matrix t = mu.value().unaryExpr([](double v) { return std::tanh(std::clamp(v, -kMaxPreSquash, kMaxPreSquash)); });
  return ((t.array().rowwise() * scale_.row(0).array()).rowwise() + offset_.row(0).array()).matrix();
}

std::vector<Parameter*> SquashedGaussianPolicy::parameters() {
  std::vector<Parameter*> out = trunk_.parameters();
  append(out, head_.parameters());
  return out;
}

GaussianLinear::GaussianLinear(const std::string& name, std::size_t in, const GaussianLinearOptions& options,
                               RandomStream& init)
    : prior_std_(options.prior_std) {
  if (!(options.prior_std > 0.0)) throw ContractError("GaussianLinear: prior std must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_mean_ = Parameter(name + ".weight_mean", init.uniform_matrix(in, 1, -bound, bound));
  weight_log_std_ = Parameter(name + ".weight_log_std", Matrix::Constant(in, 1, options.init_log_std));
  bias_mean_ = Parameter(name + ".bias_mean", init.uniform_matrix(1, 1, -bound, bound));
  bias_log_std_ = Parameter(name + ".bias_log_std", Matrix::Constant(1, 1, options.init_log_std));
}

DiffArray GaussianLinear::forward_mean(Tape& tape, const DiffArray& x, Track track) {
  return add_row(matmul(x, bind(tape, weight_mean_, track)), bind(tape, bias_mean_, track));
}

DiffArray GaussianLinear::forward_sampled(Tape& tape, const DiffArray& x, const Matrix& noise, Track track) {
  const auto in = static_cast<Eigen::Index>(in_features());
  if (x.cols() != in_features()) {
    throw DimensionError("GaussianLinear: input " + shape_string(x.value()) + " expects width " + std::to_string(in));
  }
  if (noise.rows() != static_cast<Eigen::Index>(x.rows()) || noise.cols() != in + 1) {
    throw ContractError("GaussianLinear: noise " + shape_string(noise) + " must be [" + std::to_string(x.rows()) +
                        "x" + std::to_string(in + 1) + "]");
  }
  DiffArray w_mean = transpose(bind(tape, weight_mean_, track));
  DiffArray w_std = exp_op(transpose(bind(tape, weight_log_std_, track)));
  DiffArray weights = add_row(mul_row(tape.constant(noise.leftCols(in)), w_std), w_mean);
  DiffArray b_std = exp_op(bind(tape, bias_log_std_, track));
  DiffArray bias = add_row(mul_row(tape.constant(noise.rightCols(1)), b_std), bind(tape, bias_mean_, track));
  return row_sum(x * weights) + bias;
}

double GaussianLinear::kl_to_prior() const {
  const double s0 = prior_std_;
  auto term = [s0](const Matrix& mu, const Matrix& log_std) {
    return (std::log(s0) - log_std.array() + ((2.0 * log_std.array()).exp() + mu.array().square()) / (2.0 * s0 * s0) -
            0.5)
        .sum();
  };
  return term(weight_mean_.value, weight_log_std_.value) + term(bias_mean_.value, bias_log_std_.value);
}

DiffArray GaussianLinear::kl_to_prior(Tape& tape, Track track) {
  const double s0 = prior_std_;
  auto term = [&](Parameter& mu_p, Parameter& ls_p) {
    DiffArray mu = bind(tape, mu_p, track);
    DiffArray ls = bind(tape, ls_p, track);
    DiffArray quad = scale(square(exp_op(ls)) + square(mu), 1.0 / (2.0 * s0 * s0));
    return sum(add_scalar(quad - ls, std::log(s0) - 0.5));
  };
  return term(weight_mean_, weight_log_std_) + term(bias_mean_, bias_log_std_);
}

std::vector<Parameter*> GaussianLinear::parameters() {
  return {&weight_mean_, &weight_log_std_, &bias_mean_, &bias_log_std_};
}

CriticNet::CriticNet(const std::string& name, std::size_t state_dim, std::size_t action_dim,
                     const CriticOptions& options, RandomStream& init) {
  trunk_ = MlpTrunk(name + ".trunk", state_dim + action_dim, options.trunk, init);
  if (options.head == CriticHead::kGaussian) {
    gaussian_.emplace(name + ".head", options.trunk.width, options.gaussian, init);
  } else {
    linear_.emplace(name + ".head", options.trunk.width, 1, init);
  }
}

DiffArray CriticNet::forward(Tape& tape, const DiffArray& state, const DiffArray& action, Track track) {
  DiffArray h = trunk_.forward(tape, concat_cols(state, action), track);
  return gaussian_ ? gaussian_->forward_mean(tape, h, track) : linear_->forward(tape, h, track);
}

DiffArray CriticNet::forward_sampled(Tape& tape, const DiffArray& state, const DiffArray& action, const Matrix& noise,
                                     Track track) {
  if (!gaussian_) throw ContractError("forward_sampled: critic has a deterministic head; use forward()");
  DiffArray h = trunk_.forward(tape, concat_cols(state, action), track);
  return gaussian_->forward_sampled(tape, h, noise, track);
}

std::size_t CriticNet::sample_width() const {
  if (!gaussian_) throw ContractError("sample_width: critic has a deterministic head");
  return gaussian_->sample_width();
}

GaussianLinear& CriticNet::gaussian_head() {
  if (!gaussian_) throw ContractError("gaussian_head: critic has a deterministic head");
  return *gaussian_;
}

double CriticNet::kl_to_prior() const {
  if (!gaussian_) throw ContractError("kl_to_prior: critic has a deterministic head");
  return gaussian_->kl_to_prior();
}

DiffArray CriticNet::kl_to_prior(Tape& tape, Track track) {
  if (!gaussian_) throw ContractError("kl_to_prior: critic has a deterministic head");
  return gaussian_->kl_to_prior(tape, track);
}

std::vector<Parameter*> CriticNet::parameters() {
  std::vector<Parameter*> out = trunk_.parameters();
  append(out, gaussian_ ? gaussian_->parameters() : linear_->parameters());
  return out;
}

}  // namespace pacsac::nets
