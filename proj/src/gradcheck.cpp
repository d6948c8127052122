#include "pacsac/gradcheck.hpp"

#include "pacsac/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pacsac::diff {

namespace {

std::vector<Eigen::Index> entries_to_check(Eigen::Index n, const GradCheckOptions& options, RandomStream& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const std::size_t limit = options.max_entries_per_input;
  if (limit == 0 || limit >= idx.size()) return idx;
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void compare(double analytic, double numeric, const GradCheckOptions& options, GradCheckResult& r) {
  const double abs_err = std::abs(analytic - numeric);
  const double denom = std::max(std::abs(analytic), std::abs(numeric));
  const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
  ++r.checked;
  if (abs_err > options.abs_tol) r.max_rel_error = std::max(r.max_rel_error, rel_err);
  r.max_abs_error = std::max(r.max_abs_error, abs_err);
  if (abs_err > options.abs_tol && rel_err > options.rel_tol) ++r.failures;
}

}  // namespace

GradCheckResult check_gradient(const ArrayFunction& f, const std::vector<Matrix>& inputs,
                               const GradCheckOptions& options) {
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<DiffArray> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.leaf(m));
    DiffArray out = f(tape, leaves);
    tape.backward(out);
    for (const auto& l : leaves) analytic.push_back(l.grad());
  }

  auto evaluate = [&](const std::vector<Matrix>& xs) {
    Tape tape;
    std::vector<DiffArray> leaves;
    for (const auto& m : xs) leaves.push_back(tape.constant(m));
    return f(tape, leaves).item();
  };

  GradCheckResult result;
  RandomStream rng(options.subset_seed, "gradcheck");
  std::vector<Matrix> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i : entries_to_check(inputs[k].size(), options, rng)) {
      const double x0 = inputs[k].data()[i];
      probe[k].data()[i] = x0 + options.step;
      const double up = evaluate(probe);
      probe[k].data()[i] = x0 - options.step;
      const double down = evaluate(probe);
      probe[k].data()[i] = x0;
      compare(analytic[k].data()[i], (up - down) / (2.0 * options.step), options, result);
    }
  }
  return result;
}

GradCheckResult check_parameter_gradient(const std::function<DiffArray(Tape&)>& loss,
                                         std::span<Parameter* const> params, const GradCheckOptions& options) {
  zero_grad(params);
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Matrix> analytic;
  for (const Parameter* p : params) analytic.push_back(p->grad);

  auto evaluate = [&] {
    Tape tape;
    return loss(tape).item();
  };

  GradCheckResult result;
  RandomStream rng(options.subset_seed, "gradcheck");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& v = params[k]->value;
    for (Eigen::Index i : entries_to_check(v.size(), options, rng)) {
      const double x0 = v.data()[i];
      v.data()[i] = x0 + options.step;
      const double up = evaluate();
      v.data()[i] = x0 - options.step;
      const double down = evaluate();
      v.data()[i] = x0;
      compare(analytic[k].data()[i], (up - down) / (2.0 * options.step), options, result);
    }
  }
  zero_grad(params);
  return result;
}

}  // namespace pacsac::diff
