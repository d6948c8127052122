#include "pacsac/boundlab.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace pacsac::boundlab {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr std::size_t kMaxPowerIterations = 1000000;

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

void check_shapes(const FiniteMDP& mdp, const TabularPolicy& pi) {
  if (pi.n_states() != mdp.n_states || pi.n_actions() != mdp.n_actions) {
    throw DimensionError("policy " + shape_string(pi.probs) + " does not match MDP with " +
                         std::to_string(mdp.n_states) + " states and " + std::to_string(mdp.n_actions) + " actions");
  }
}

// E_{s'}[f(s')] for every (s, a).
Matrix expect_next(const FiniteMDP& mdp, const Eigen::VectorXd& f) {
  Matrix out(mdp.n_states, mdp.n_actions);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double acc = 0.0;
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) acc += mdp.p(s, a, s2) * f(s2);
      out(s, a) = acc;
    }
  }
  return out;
}

double weighted_sq_norm(const Matrix& diff, const Eigen::VectorXd& d, const TabularPolicy& pi) {
  double acc = 0.0;
  for (Eigen::Index s = 0; s < diff.rows(); ++s) {
    for (Eigen::Index a = 0; a < diff.cols(); ++a) acc += d(s) * pi.probs(s, a) * diff(s, a) * diff(s, a);
  }
  return acc;
}

std::vector<double> dirichlet_row(std::size_t n, RandomStream& rng) {
  std::vector<double> row(n);
  double total = 0.0;
  for (auto& v : row) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (auto& v : row) v /= total;
  return row;
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

void FiniteMDP::validate() const {
  if (n_states == 0 || n_actions == 0) throw ContractError("FiniteMDP: empty state or action set");
  if (transitions.size() != n_states * n_actions * n_states) throw ContractError("FiniteMDP: transition tensor size");
  if (static_cast<std::size_t>(rewards.rows()) != n_states || static_cast<std::size_t>(rewards.cols()) != n_actions) {
    throw ContractError("FiniteMDP: reward table " + shape_string(rewards));
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("FiniteMDP: gamma must lie in (0, 1)");
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (std::size_t s2 = 0; s2 < n_states; ++s2) {
        if (p(s, a, s2) < 0.0) throw ContractError("FiniteMDP: negative transition probability");
        total += p(s, a, s2);
      }
      if (std::abs(total - 1.0) > kStochasticTol) {
        throw ContractError("FiniteMDP: row (" + std::to_string(s) + ", " + std::to_string(a) + ") sums to " +
                            std::to_string(total));
      }
      if (rewards(s, a) < r_min || rewards(s, a) > r_max) throw ContractError("FiniteMDP: reward outside range");
    }
  }
}

void TabularPolicy::validate() const {
  for (Eigen::Index s = 0; s < probs.rows(); ++s) {
    if ((probs.row(s).array() < 0.0).any()) throw ContractError("TabularPolicy: negative probability");
    if (std::abs(probs.row(s).sum() - 1.0) > kStochasticTol) throw ContractError("TabularPolicy: row does not sum to 1");
  }
}

Eigen::VectorXd soft_state_value(const TabularPolicy& pi, const Matrix& q, double alpha) {
  Eigen::VectorXd v(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    double acc = 0.0;
    for (Eigen::Index a = 0; a < q.cols(); ++a) acc += pi.probs(s, a) * q(s, a) - alpha * xlogx(pi.probs(s, a));
    v(s) = acc;
  }
  return v;
}

Matrix soft_backup(const FiniteMDP& mdp, const TabularPolicy& pi, const Matrix& q, double alpha) {
  check_shapes(mdp, pi);
  return mdp.rewards + mdp.gamma * expect_next(mdp, soft_state_value(pi, q, alpha));
}

Matrix exact_soft_q(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha) {
  mdp.validate();
  pi.validate();
  check_shapes(mdp, pi);
  Matrix q = Matrix::Zero(mdp.n_states, mdp.n_actions);
  // Contraction: the residual shrinks by gamma per sweep.
  for (std::size_t it = 0; it < kMaxPowerIterations; ++it) {
    Matrix next = soft_backup(mdp, pi, q, alpha);
    const double residual = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (residual < 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff())) return q;
  }
  throw DegenerateChainError("exact_soft_q: no convergence");
}

FiniteMDP entropy_adjusted(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha) {
  check_shapes(mdp, pi);
  Eigen::VectorXd neg_entropy(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) acc += xlogx(pi.probs(s, a));
    neg_entropy(s) = acc;
  }
  FiniteMDP out = mdp;
  out.rewards = mdp.rewards - mdp.gamma * alpha * expect_next(mdp, neg_entropy);
  out.r_min = std::min(mdp.r_min, out.rewards.minCoeff());
  out.r_max = std::max(mdp.r_max, out.rewards.maxCoeff());
  return out;
}

Matrix induced_chain(const FiniteMDP& mdp, const TabularPolicy& pi) {
  check_shapes(mdp, pi);
  Matrix chain = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) chain(s, s2) += pi.probs(s, a) * mdp.p(s, a, s2);
    }
  }
  return chain;
}

Eigen::VectorXd state_values(const FiniteMDP& mdp, const TabularPolicy& pi) {
  const Matrix chain = induced_chain(mdp, pi);
  Eigen::VectorXd r(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) r(s) = pi.probs.row(s).dot(mdp.rewards.row(s));
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * Eigen::MatrixXd(chain);
  return a.partialPivLu().solve(r);
}

Eigen::VectorXd stationary_distribution(const FiniteMDP& mdp, const TabularPolicy& pi) {
  const Eigen::MatrixXd chain = induced_chain(mdp, pi);
  Eigen::RowVectorXd d = Eigen::RowVectorXd::Constant(mdp.n_states, 1.0 / mdp.n_states);
  for (std::size_t it = 0; it < kMaxPowerIterations; ++it) {
    Eigen::RowVectorXd next = d * chain;
    next /= next.sum();
    const double change = (next - d).cwiseAbs().sum();
    d = next;
    if (change < 1e-12) return d.transpose();
  }
  throw DegenerateChainError("stationary_distribution: power iteration did not converge in " +
                             std::to_string(kMaxPowerIterations) + " steps (reducible or periodic chain?)");
}

Lemma1Result check_lemma1(const FiniteMDP& mdp, const TabularPolicy& pi, const Matrix& q_hat, double alpha) {
  const Matrix q = exact_soft_q(mdp, pi, alpha);
  const Eigen::VectorXd d = stationary_distribution(mdp, pi);
  Lemma1Result out;
  out.lhs = weighted_sq_norm(q_hat - q, d, pi);
  const double k = 1.0 / ((1.0 - mdp.gamma) * (1.0 - mdp.gamma));
  out.rhs = k * weighted_sq_norm(soft_backup(mdp, pi, q_hat, alpha) - q_hat, d, pi);
  out.holds = out.lhs <= out.rhs + 1e-9;
  return out;
}

TabularPolicy search_policy(const TabularPolicy& pi, const Matrix& q, std::size_t samples) {
  if (samples == 0) throw ContractError("search_policy: R must be at least 1");
  const auto n_a = pi.n_actions();
  TabularPolicy out{Matrix::Zero(pi.n_states(), n_a)};
  std::vector<std::size_t> order(n_a);
  for (std::size_t s = 0; s < pi.n_states(); ++s) {
    std::iota(order.begin(), order.end(), 0);
    // Ascending preference: larger q later, and among ties the lower index later.
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
      if (q(s, i) != q(s, j)) return q(s, i) < q(s, j);
      return i > j;
    });
    const double r = static_cast<double>(samples);
    double below = 0.0;
    for (std::size_t a : order) {
      const double upto = std::min(1.0, below + pi.probs(s, a));
      out.probs(s, a) = std::pow(upto, r) - std::pow(below, r);
      below = upto;
    }
  }
  return out;
}

TabularPolicy sample_search_policy(const TabularPolicy& pi, const Matrix& q, std::size_t samples, RandomStream& rng) {
  if (samples == 0) throw ContractError("sample_search_policy: R must be at least 1");
  TabularPolicy out{Matrix::Zero(pi.n_states(), pi.n_actions())};
  for (std::size_t s = 0; s < pi.n_states(); ++s) {
    std::discrete_distribution<std::size_t> draw(pi.probs.row(s).data(), pi.probs.row(s).data() + pi.n_actions());
    std::size_t best = draw(rng.engine());
    for (std::size_t k = 1; k < samples; ++k) {
      const std::size_t a = draw(rng.engine());
      if (q(s, a) > q(s, best) || (q(s, a) == q(s, best) && a < best)) best = a;
    }
    out.probs(s, best) = 1.0;
  }
  return out;
}

PolicyImprovementResult check_policy_improvement_R(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha,
                                                   std::size_t samples, std::size_t trials, RandomStream& rng) {
  const Matrix q = exact_soft_q(mdp, pi, alpha);
  const FiniteMDP adjusted = entropy_adjusted(mdp, pi, alpha);

  PolicyImprovementResult out;
  out.samples = samples;
  out.trials = trials;
  out.base_value = state_values(adjusted, pi);
  const TabularPolicy exact = search_policy(pi, q, samples);
  out.search_value = state_values(adjusted, exact);
  out.improvement_gap = (out.search_value - out.base_value).minCoeff();
  out.searched_value = (exact.probs.array() * q.array()).rowwise().sum().matrix();

  out.trial_mean_value = Eigen::VectorXd::Zero(mdp.n_states);
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::VectorXd v = state_values(adjusted, sample_search_policy(pi, q, samples, rng));
    out.trial_mean_value += v;
    out.trial_shortfalls += static_cast<std::size_t>((v.array() < out.base_value.array() - 1e-9).count());
  }
  if (trials > 0) out.trial_mean_value /= static_cast<double>(trials);
  out.holds = out.improvement_gap >= -1e-9;
  return out;
}

PolicyImprovementSweep sweep_policy_improvement(const FiniteMDP& mdp, const TabularPolicy& pi, double alpha,
                                                const std::vector<std::size_t>& sample_counts, std::size_t trials,
                                                RandomStream& rng) {
  PolicyImprovementSweep out;
  out.holds = true;
  out.searched_monotone = true;
  out.value_monotone = true;
  for (std::size_t i = 0; i < sample_counts.size(); ++i) {
    if (i > 0 && sample_counts[i] <= sample_counts[i - 1]) throw ContractError("sweep: R values must increase");
    out.results.push_back(check_policy_improvement_R(mdp, pi, alpha, sample_counts[i], trials, rng));
    const auto& cur = out.results.back();
    out.holds = out.holds && cur.holds;
    if (i > 0) {
      const auto& prev = out.results[i - 1];
      if ((cur.searched_value.array() < prev.searched_value.array() - 1e-9).any()) out.searched_monotone = false;
      if ((cur.search_value.array() < prev.search_value.array() - 1e-9).any()) out.value_monotone = false;
    }
  }
  out.holds = out.holds && out.searched_monotone;
  return out;
}

double range_constant(const BoundInputs& in, RangeConvention convention) {
  switch (convention) {
    case RangeConvention::kAbsoluteSum: return std::pow(in.r_max + std::abs(in.r_min), 2);
    case RangeConvention::kRange: return std::pow(in.r_max - in.r_min, 2);
    case RangeConvention::kQMax: return in.q_max * in.q_max;
  }
  throw ContractError("range_constant: unknown convention");
}

BoundReport pac_bound_report(const BoundInputs& in, RangeConvention convention) {
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw DomainError("pac bound: delta must lie in (0, 1)");
  if (!(in.c1 > 0.0 && in.c2 > 0.0)) throw DomainError("pac bound: c1 and c2 must be positive");
  if (in.kl < 0.0) throw DomainError("pac bound: kl must be non-negative");
  BoundReport out;
  out.range_constant = range_constant(in, convention);
  if (!(out.range_constant > 0.0)) throw DomainError("pac bound: reward-range constant must be positive");
  out.denominator = in.n / (out.range_constant * in.c1) - 1.0;
  if (out.denominator <= 0.0) {
    const double n_min = std::floor(out.range_constant * in.c1) + 1.0;
    throw SampleSizeError("pac bound: N = " + std::to_string(in.n) + " is too small; need N >= " +
                              std::to_string(static_cast<long long>(n_min)),
                          n_min);
  }
  out.numerator = std::log(in.c2 * in.n / (in.c1 * out.range_constant * in.delta)) + in.kl;
  if (out.numerator < 0.0) throw DomainError("pac bound: negative numerator; c2 too small for this N");
  out.complexity = std::sqrt(out.numerator / out.denominator);
  out.bound = in.empirical_risk - in.correction + out.complexity;
  return out;
}

double compute_pac_bound(const BoundInputs& in, RangeConvention convention) {
  return pac_bound_report(in, convention).complexity;
}

FiniteMDP random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, RandomStream& rng, double r_min,
                     double r_max) {
  FiniteMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.r_min = r_min;
  mdp.r_max = r_max;
  mdp.transitions.resize(n_states * n_actions * n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      auto row = dirichlet_row(n_states, rng);
      // Renormalising can leave a rounding error; fold it into the last entry.
      double total = 0.0;
      for (std::size_t s2 = 0; s2 + 1 < n_states; ++s2) total += row[s2];
      row[n_states - 1] = std::max(0.0, 1.0 - total);
      for (std::size_t s2 = 0; s2 < n_states; ++s2) mdp.p(s, a, s2) = row[s2];
    }
  }
  mdp.rewards = rng.uniform_matrix(n_states, n_actions, r_min, r_max);
  return mdp;
}

TabularPolicy random_policy(std::size_t n_states, std::size_t n_actions, RandomStream& rng) {
  TabularPolicy pi{Matrix(n_states, n_actions)};
  for (std::size_t s = 0; s < n_states; ++s) {
    auto row = dirichlet_row(n_actions, rng);
    for (std::size_t a = 0; a < n_actions; ++a) pi.probs(s, a) = row[a];
  }
  return pi;
}

TabularPolicy uniform_policy(std::size_t n_states, std::size_t n_actions) {
  return TabularPolicy{Matrix::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions))};
}

void write_counterexample(const std::filesystem::path& path, const Counterexample& c) {
  nlohmann::json j;
  j["check"] = c.check;
  j["seed"] = c.seed;
  j["instance"] = c.instance;
  j["alpha"] = c.alpha;
  j["detail"] = c.detail;
  j["gamma"] = c.mdp.gamma;
  j["r_min"] = c.mdp.r_min;
  j["r_max"] = c.mdp.r_max;
  j["n_states"] = c.mdp.n_states;
  j["n_actions"] = c.mdp.n_actions;
  j["transitions"] = c.mdp.transitions;
  j["rewards"] = matrix_json(c.mdp.rewards);
  j["policy"] = matrix_json(c.policy.probs);
  j["q_hat"] = matrix_json(c.q_hat);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Counterexample read_counterexample(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  Counterexample c;
  c.check = j.at("check").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.instance = j.at("instance").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.detail = j.at("detail").get<std::string>();
  c.mdp.gamma = j.at("gamma").get<double>();
  c.mdp.r_min = j.at("r_min").get<double>();
  c.mdp.r_max = j.at("r_max").get<double>();
  c.mdp.n_states = j.at("n_states").get<std::size_t>();
  c.mdp.n_actions = j.at("n_actions").get<std::size_t>();
  c.mdp.transitions = j.at("transitions").get<std::vector<double>>();
  c.mdp.rewards = matrix_from_json(j.at("rewards"));
  c.policy.probs = matrix_from_json(j.at("policy"));
  c.q_hat = matrix_from_json(j.at("q_hat"));
  return c;
}

}  // namespace pacsac::boundlab
