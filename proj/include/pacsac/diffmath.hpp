#ifndef PACSAC_DIFFMATH_HPP
#define PACSAC_DIFFMATH_HPP

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pacsac {

/// Row-major dense matrix used for every array in the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::string shape_string(const Matrix& m);

}  // namespace pacsac

namespace pacsac::diff {

/// A persistent trainable array. Lives outside any tape; a tape binds it as a
/// leaf and flushes the leaf gradient into `grad` at the end of backward().
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(); }

  std::string name;
  Matrix value;
  Matrix grad;
};

class Tape;

/// Handle to one node of a Tape. Cheap to copy; valid while its tape lives.
class DiffArray {
 public:
  DiffArray() = default;

  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t size() const { return value().size(); }
  std::array<std::size_t, 2> shape() const { return {rows(), cols()}; }

  const Matrix& value() const;
  const Matrix& grad() const;
  /// Value of a 1x1 array.
  double item() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  DiffArray(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Views handed to a recorded backward rule. `in_grads[i]` is null when the
/// i-th parent does not require a gradient.
struct BackwardContext {
  const Matrix& out_value;
  const Matrix& out_grad;
  std::span<const Matrix* const> in_values;
  std::span<Matrix* const> in_grads;
};

using BackwardRule = std::function<void(const BackwardContext&)>;

/// Define-by-run computation record. Nodes are appended in evaluation order,
/// so every node's parents precede it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Array that never receives gradient.
  DiffArray constant(Matrix value);
  DiffArray constant(double value);
  /// Leaf whose gradient accumulates across backward() calls.
  DiffArray leaf(Matrix value);
  /// Leaf bound to a parameter; gradient is added to `p.grad`.
  DiffArray parameter(Parameter& p);

  DiffArray record(Matrix value, std::vector<DiffArray> parents, BackwardRule rule);

  /// Reverse sweep from a scalar output. Interior gradients are recomputed on
  /// every call; leaf and parameter gradients accumulate.
  void backward(const DiffArray& output);

  /// Zeroes every node's gradient (parameter buffers are left alone).
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  const Matrix& grad(std::size_t id) const { return nodes_.at(id).grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

 private:
  enum class Kind { kConstant, kLeaf, kParameter, kInterior };

  struct Node {
    Kind kind = Kind::kConstant;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardRule rule;
    Parameter* sink = nullptr;
  };

  DiffArray push(Node node);

  std::deque<Node> nodes_;
};

// Primitive operations. All shapes are [rows x cols]; mismatches throw
// DimensionError naming both shapes.
DiffArray matmul(const DiffArray& a, const DiffArray& b);
DiffArray transpose(const DiffArray& a);
DiffArray add(const DiffArray& a, const DiffArray& b);
DiffArray sub(const DiffArray& a, const DiffArray& b);
DiffArray mul(const DiffArray& a, const DiffArray& b);
/// Elementwise minimum; on ties the gradient goes to `a`.
DiffArray minimum(const DiffArray& a, const DiffArray& b);
/// a [m x n] + row [1 x n], broadcast over rows.
DiffArray add_row(const DiffArray& a, const DiffArray& row);
/// a [m x n] * row [1 x n], broadcast over rows.
DiffArray mul_row(const DiffArray& a, const DiffArray& row);
/// Broadcasts a 1x1 array to [rows x cols].
DiffArray broadcast_scalar(const DiffArray& s, std::size_t rows, std::size_t cols);
DiffArray scale(const DiffArray& a, double factor);
DiffArray add_scalar(const DiffArray& a, double offset);
DiffArray neg(const DiffArray& a);
DiffArray square(const DiffArray& a);
DiffArray sqrt_op(const DiffArray& a);
DiffArray exp_op(const DiffArray& a);
/// Throws DomainError if any element is <= 0.
DiffArray log_op(const DiffArray& a);
/// Gradient passes where lo <= x <= hi (boundary included), zero elsewhere.
DiffArray clamp(const DiffArray& a, double lo, double hi);
DiffArray tanh_op(const DiffArray& a);
DiffArray sigmoid(const DiffArray& a);
DiffArray silu(const DiffArray& a);
/// Per-row (x - mean) / sqrt(var + eps), population variance.
DiffArray layer_norm(const DiffArray& x, double eps = 1e-5);
DiffArray sum(const DiffArray& a);
DiffArray mean(const DiffArray& a);
/// [m x n] -> [m x 1]
DiffArray row_sum(const DiffArray& a);
DiffArray concat_cols(const DiffArray& a, const DiffArray& b);
DiffArray slice_cols(const DiffArray& a, std::size_t start, std::size_t count);

inline DiffArray operator+(const DiffArray& a, const DiffArray& b) { return add(a, b); }
inline DiffArray operator-(const DiffArray& a, const DiffArray& b) { return sub(a, b); }
inline DiffArray operator*(const DiffArray& a, const DiffArray& b) { return mul(a, b); }
inline DiffArray operator-(const DiffArray& a) { return neg(a); }
inline DiffArray operator*(const DiffArray& a, double s) { return scale(a, s); }
inline DiffArray operator*(double s, const DiffArray& a) { return scale(a, s); }
inline DiffArray operator+(const DiffArray& a, double s) { return add_scalar(a, s); }

}  // namespace pacsac::diff

#endif  // PACSAC_DIFFMATH_HPP
