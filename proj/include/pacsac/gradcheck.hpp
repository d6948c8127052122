#ifndef PACSAC_GRADCHECK_HPP
#define PACSAC_GRADCHECK_HPP

#include "pacsac/diffmath.hpp"
#include "pacsac/rng.hpp"

#include <functional>
#include <span>
#include <vector>

namespace pacsac::diff {

/// Worst-case disagreement between recorded and central-difference gradients.
/// An entry counts as matching when its absolute error is below `abs_tol` or
/// its relative error is below `rel_tol`.
struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  std::size_t failures = 0;

  bool passed() const { return failures == 0; }
};

struct GradCheckOptions {
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_tol = 1e-6;
  /// 0 checks every entry; otherwise a seeded subset of this many entries per
  /// input.
  std::size_t max_entries_per_input = 0;
  std::uint64_t subset_seed = 0;
};

using ArrayFunction = std::function<DiffArray(Tape&, std::span<const DiffArray>)>;

/// Checks d f / d inputs where f maps leaf arrays to a scalar.
GradCheckResult check_gradient(const ArrayFunction& f, const std::vector<Matrix>& inputs,
                               const GradCheckOptions& options = {});

/// Checks d loss / d params where `loss` binds the parameters itself.
GradCheckResult check_parameter_gradient(const std::function<DiffArray(Tape&)>& loss,
                                         std::span<Parameter* const> params,
                                         const GradCheckOptions& options = {});

}  // namespace pacsac::diff

#endif  // PACSAC_GRADCHECK_HPP
