#include "pacsac/boundlab.hpp"
#include "pacsac/gradcheck.hpp"
#include "pacsac/harness.hpp"
#include "pacsac/losses.hpp"
#include "pacsac/nets.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace pacsac::harness {

namespace {

using diff::DiffArray;
using diff::Tape;

struct Primitive {
  std::string name;
  std::vector<std::pair<int, int>> shapes;
  double lo;
  double hi;
  std::function<DiffArray(std::span<const DiffArray>)> f;
};

// Reduces an arbitrary array to a scalar with non-uniform weights so every
// output entry carries a distinct upstream gradient.
DiffArray weighted_sum(const DiffArray& y) {
  Matrix w(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.5 + 0.25 * static_cast<double>(i % 7);
  return diff::sum(y * y.tape()->constant(w));
}

std::vector<Primitive> primitives() {
  using namespace diff;
  auto l = [](auto op) { return op; };
  return {
      {"matmul", {{3, 4}, {4, 2}}, -2, 2, l([](auto x) { return matmul(x[0], x[1]); })},
      {"transpose", {{3, 2}}, -2, 2, l([](auto x) { return transpose(x[0]); })},
      {"add", {{2, 3}, {2, 3}}, -2, 2, l([](auto x) { return x[0] + x[1]; })},
      {"sub", {{2, 3}, {2, 3}}, -2, 2, l([](auto x) { return x[0] - x[1]; })},
      {"mul", {{2, 3}, {2, 3}}, -2, 2, l([](auto x) { return x[0] * x[1]; })},
      {"minimum", {{3, 2}, {3, 2}}, -2, 2, l([](auto x) { return minimum(x[0], x[1]); })},
      {"add_row", {{3, 4}, {1, 4}}, -2, 2, l([](auto x) { return add_row(x[0], x[1]); })},
      {"mul_row", {{3, 4}, {1, 4}}, -2, 2, l([](auto x) { return mul_row(x[0], x[1]); })},
      {"broadcast_scalar", {{1, 1}}, -2, 2, l([](auto x) { return broadcast_scalar(x[0], 2, 3); })},
      {"scale", {{2, 2}}, -2, 2, l([](auto x) { return scale(x[0], -1.7); })},
      {"square", {{2, 3}}, -2, 2, l([](auto x) { return square(x[0]); })},
      {"sqrt", {{2, 3}}, 0.5, 2, l([](auto x) { return sqrt_op(x[0]); })},
      {"exp", {{2, 3}}, -2, 2, l([](auto x) { return exp_op(x[0]); })},
      {"log", {{2, 3}}, 0.5, 2, l([](auto x) { return log_op(x[0]); })},
      {"clamp", {{3, 3}}, -2, 2, l([](auto x) { return clamp(x[0], -1.0, 1.0); })},
      {"tanh", {{2, 3}}, -2, 2, l([](auto x) { return tanh_op(x[0]); })},
      {"sigmoid", {{2, 3}}, -2, 2, l([](auto x) { return sigmoid(x[0]); })},
      {"silu", {{2, 3}}, -2, 2, l([](auto x) { return silu(x[0]); })},
      {"layer_norm", {{2, 5}}, -2, 2, l([](auto x) { return layer_norm(x[0]); })},
      {"mean", {{3, 3}}, -2, 2, l([](auto x) { return mean(x[0]); })},
      {"row_sum", {{3, 4}}, -2, 2, l([](auto x) { return row_sum(x[0]); })},
      {"concat_cols", {{2, 2}, {2, 3}}, -2, 2, l([](auto x) { return concat_cols(x[0], x[1]); })},
      {"slice_cols", {{2, 5}}, -2, 2, l([](auto x) { return slice_cols(x[0], 1, 3); })},
  };
}

// Keeps clamp inputs off the kinks so central differences stay valid.
Matrix draw_input(RandomStream& rng, int rows, int cols, double lo, double hi) {
  Matrix m = rng.uniform_matrix(rows, cols, lo, hi);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    while (std::abs(std::abs(m.data()[i]) - 1.0) < 1e-3) m.data()[i] = rng.uniform(lo, hi);
  }
  return m;
}

CheckOutcome check_primitives(const VerifyOptions& opt) {
  CheckOutcome out{"gradients: primitives", true, "", 0.0};
  RandomStream rng(opt.seed, "verify-primitives");
  double worst = 0.0;
  std::size_t cases = 0;
  for (const auto& p : primitives()) {
    for (std::size_t k = 0; k < opt.gradient_instances; ++k) {
      std::vector<Matrix> inputs;
      for (auto [r, c] : p.shapes) inputs.push_back(draw_input(rng, r, c, p.lo, p.hi));
      auto res = diff::check_gradient([&](Tape&, std::span<const DiffArray> x) { return weighted_sum(p.f(x)); },
                                      inputs);
      worst = std::max(worst, res.max_rel_error);
      ++cases;
      if (!res.passed() && out.passed) {
        out.passed = false;
        out.detail = p.name + " instance " + std::to_string(k) + " rel " + std::to_string(res.max_rel_error) + "; ";
      }
    }
  }
  out.detail += std::to_string(cases) + " instances, worst rel error " + std::to_string(worst);
  return out;
}

nets::TrunkOptions tiny_trunk() {
  nets::TrunkOptions t;
  t.width = 8;
  return t;
}

CheckOutcome check_losses(const VerifyOptions& opt) {
  CheckOutcome out{"gradients: full losses", true, "", 0.0};
  RandomStream rng(opt.seed, "verify-losses");
  diff::GradCheckOptions gopt;
  gopt.rel_tol = 1e-3;
  gopt.abs_tol = 1e-6;
  gopt.max_entries_per_input = 12;
  double worst = 0.0;
  for (std::size_t k = 0; k < opt.gradient_instances; ++k) {
    gopt.subset_seed = k;
    const std::size_t ds = 3;
    const std::size_t m = 4;
    nets::CriticOptions co;
    co.trunk = tiny_trunk();
    co.head = nets::CriticHead::kGaussian;
    co.gaussian.init_log_std = -1.0;
    nets::CriticNet critic("critic", ds, 1, co, rng);
    const Matrix s = rng.uniform_matrix(m, ds, -1, 1);
    const Matrix a = rng.uniform_matrix(m, 1, -2, 2);
    const Matrix y = rng.uniform_matrix(m, 1, -2, 2);
    const Matrix noise = rng.normal_matrix(m, critic.sample_width());
    auto critic_loss = [&](Tape& tape) {
      DiffArray q = critic.forward_sampled(tape, tape.constant(s), tape.constant(a), noise, nets::Track::kTrainable);
      DiffArray kl = critic.kl_to_prior(tape, nets::Track::kTrainable);
      return agents::pac_critic_loss(q, y, kl, 10, 0.99, 0.01, {}).total;
    };
    auto params = critic.parameters();
    auto rc = diff::check_parameter_gradient(critic_loss, params, gopt);

    nets::PolicyOptions po;
    po.trunk = tiny_trunk();
    nets::SquashedGaussianPolicy actor(ds, {-2.0}, {2.0}, po, rng);
    const Matrix eps = rng.normal_matrix(m, 1);
    auto actor_loss = [&](Tape& tape) {
      DiffArray st = tape.constant(s);
      auto pi = actor.sample(tape, st, eps, nets::Track::kTrainable);
      DiffArray q = critic.forward_sampled(tape, st, pi.action, noise, nets::Track::kFrozen);
      return agents::policy_improvement_loss(pi.log_prob, q, 0.2, true);
    };
    auto aparams = actor.parameters();
    auto ra = diff::check_parameter_gradient(actor_loss, aparams, gopt);
    worst = std::max({worst, rc.max_rel_error, ra.max_rel_error});
    if ((!rc.passed() || !ra.passed()) && out.passed) {
      out.passed = false;
      out.detail = std::string(rc.passed() ? "policy" : "critic") + " loss failed at instance " + std::to_string(k) +
                   "; ";
    }
  }
  out.detail += std::to_string(opt.gradient_instances) + " instances per loss, worst rel error " +
                std::to_string(worst);
  return out;
}

struct Instance {
  boundlab::FiniteMDP mdp;
  boundlab::TabularPolicy pi;
  double alpha;
};

Instance random_instance(RandomStream& rng, std::size_t max_states, std::size_t max_actions) {
  static const double gammas[] = {0.5, 0.9, 0.95};
  static const double alphas[] = {0.0, 0.2, 1.0};
  const std::size_t ns = 2 + rng.index(max_states - 1);
  const std::size_t na = 2 + rng.index(max_actions - 1);
  const double gamma = gammas[rng.index(3)];
  Instance in{boundlab::random_mdp(ns, na, gamma, rng), {}, alphas[rng.index(3)]};
  in.pi = boundlab::random_policy(ns, na, rng);
  return in;
}

void save(const VerifyOptions& opt, const std::string& check, std::size_t k, const Instance& in, const Matrix& q_hat,
          const std::string& detail) {
  if (opt.counterexample_dir.empty()) return;
  std::filesystem::create_directories(opt.counterexample_dir);
  boundlab::Counterexample c{check, opt.seed, k, in.mdp, in.pi, q_hat, in.alpha, detail};
  boundlab::write_counterexample(opt.counterexample_dir / (check + "_" + std::to_string(k) + ".json"), c);
}

CheckOutcome check_lemma(const VerifyOptions& opt) {
  CheckOutcome out{"value error bound", true, "", 0.0};
  RandomStream rng(opt.seed, "verify-lemma");
  std::size_t violations = 0;
  double tightest = 0.0;
  for (std::size_t k = 0; k < opt.lemma_instances; ++k) {
    Instance in = random_instance(rng, 6, 3);
    const Matrix q_hat = rng.uniform_matrix(in.mdp.n_states, in.mdp.n_actions, -10, 10);
    auto r = boundlab::check_lemma1(in.mdp, in.pi, q_hat, in.alpha);
    if (r.rhs > 0) tightest = std::max(tightest, r.lhs / r.rhs);
    if (!r.holds) {
      ++violations;
      save(opt, "lemma1", k, in, q_hat, "lhs " + std::to_string(r.lhs) + " rhs " + std::to_string(r.rhs));
    }
  }
  out.passed = violations == 0;
  out.detail = std::to_string(opt.lemma_instances) + " instances, " + std::to_string(violations) +
               " violations, max lhs/rhs " + std::to_string(tightest);
  return out;
}

CheckOutcome check_improvement(const VerifyOptions& opt) {
  CheckOutcome out{"search policy improvement", true, "", 0.0};
  RandomStream rng(opt.seed, "verify-improvement");
  std::size_t failures = 0;
  std::size_t non_monotone_values = 0;
  std::size_t shortfalls = 0;
  for (std::size_t k = 0; k < opt.improvement_instances; ++k) {
    Instance in = random_instance(rng, 5, 3);
    auto sweep = boundlab::sweep_policy_improvement(in.mdp, in.pi, in.alpha, {1, 2, 8, 32},
                                                    opt.improvement_trials, rng);
    if (!sweep.value_monotone) ++non_monotone_values;
    for (const auto& r : sweep.results) shortfalls += r.trial_shortfalls;
    if (!sweep.holds) {
      ++failures;
      save(opt, "improvement", k, in, Matrix(), sweep.searched_monotone ? "value below base" : "searched not monotone");
    }
  }
  out.passed = failures == 0;
  out.detail = std::to_string(opt.improvement_instances) + " instances, " + std::to_string(failures) +
               " failures; per-trial shortfalls " + std::to_string(shortfalls) + ", non-monotone V " +
               std::to_string(non_monotone_values);
  return out;
}

CheckOutcome check_kl(const VerifyOptions& opt) {
  CheckOutcome out{"kl closed form vs monte carlo", true, "", 0.0};
  RandomStream rng(opt.seed, "verify-kl");
  constexpr std::size_t kSamples = 1000000;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    nets::GaussianLinear layer("g", 4, {1.0, -1.0}, rng);
    for (auto* p : {&layer.weight_mean(), &layer.bias_mean()}) p->value = rng.uniform_matrix(p->value.rows(), 1, -2, 2);
    for (auto* p : {&layer.weight_log_std(), &layer.bias_log_std()}) {
      p->value = rng.uniform_matrix(p->value.rows(), 1, -1.5, -0.5);
    }
    std::vector<double> mu;
    std::vector<double> sd;
    for (Eigen::Index i = 0; i < 4; ++i) {
      mu.push_back(layer.weight_mean().value(i, 0));
      sd.push_back(std::exp(layer.weight_log_std().value(i, 0)));
    }
    mu.push_back(layer.bias_mean().value(0, 0));
    sd.push_back(std::exp(layer.bias_log_std().value(0, 0)));
    const double s0 = layer.prior_std();
    double acc = 0.0;
    for (std::size_t n = 0; n < kSamples; ++n) {
      for (std::size_t i = 0; i < mu.size(); ++i) {
        const double e = rng.normal();
        const double w = mu[i] + sd[i] * e;
        acc += -0.5 * e * e - std::log(sd[i]) + 0.5 * (w / s0) * (w / s0) + std::log(s0);
      }
    }
    const double mc = acc / kSamples;
    const double exact = layer.kl_to_prior();
    const double rel = std::abs(mc - exact) / exact;
    worst = std::max(worst, rel);
    if (rel > 0.01) out.passed = false;
  }
  out.detail = "10 posteriors, worst relative gap " + std::to_string(worst);
  return out;
}

CheckOutcome check_bound(const VerifyOptions&) {
  CheckOutcome out{"pac bound monotonicity", true, "", 0.0};
  std::size_t points = 0;
  std::size_t bad = 0;
  const double kls[] = {0.0, 0.5, 2.0, 10.0, 50.0, 200.0, 1000.0, 5000.0, 2e4, 1e5};
  const double ns[] = {50, 100, 500, 1e3, 5e3, 1e4, 5e4, 1e5, 1e6, 1e7};
  const double deltas[] = {0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.9};
  for (auto conv : {boundlab::RangeConvention::kRange, boundlab::RangeConvention::kAbsoluteSum}) {
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        for (int d = 0; d < 10; ++d) {
          boundlab::BoundInputs in;
          in.r_min = -1.0;
          in.r_max = 2.0;
          in.kl = kls[i];
          in.n = ns[j];
          in.delta = deltas[d];
          const double b = boundlab::compute_pac_bound(in, conv);
          ++points;
          if (i + 1 < 10) {
            auto up = in;
            up.kl = kls[i + 1];
            if (!(boundlab::compute_pac_bound(up, conv) > b)) ++bad;
          }
          if (j + 1 < 10) {
            auto up = in;
            up.n = ns[j + 1];
            if (!(boundlab::compute_pac_bound(up, conv) < b)) ++bad;
          }
          if (d + 1 < 10) {
            auto up = in;
            up.delta = deltas[d + 1];
            if (!(boundlab::compute_pac_bound(up, conv) < b)) ++bad;
          }
        }
      }
    }
  }
  out.passed = bad == 0;
  out.detail = std::to_string(points) + " grid points, " + std::to_string(bad) + " monotonicity failures";
  return out;
}

}  // namespace

std::vector<CheckOutcome> run_verify(const VerifyOptions& options) {
  const std::vector<std::pair<std::string, CheckOutcome (*)(const VerifyOptions&)>> checks = {
      {"gradients: primitives", check_primitives},
      {"gradients: full losses", check_losses},
      {"value error bound", check_lemma},
      {"search policy improvement", check_improvement},
      {"kl closed form vs monte carlo", check_kl},
      {"pac bound monotonicity", check_bound}};
  std::vector<CheckOutcome> out;
  for (const auto& [name, check] : checks) {
    const auto start = std::chrono::steady_clock::now();
    CheckOutcome c;
    try {
      c = check(options);
    } catch (const std::exception& e) {
      c.name = name;
      c.passed = false;
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace pacsac::harness
