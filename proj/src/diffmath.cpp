#include "pacsac/diffmath.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pacsac {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

}  // namespace pacsac

namespace pacsac::diff {

namespace {

void require_same_tape(const DiffArray& a, const DiffArray& b, const char* op) {
  if (!a.valid() || !b.valid()) throw ContractError(std::string(op) + ": unbound array");
  if (a.tape() != b.tape()) throw ContractError(std::string(op) + ": arrays belong to different tapes");
}

void require_valid(const DiffArray& a, const char* op) {
  if (!a.valid()) throw ContractError(std::string(op) + ": unbound array");
}

void require_same_shape(const DiffArray& a, const DiffArray& b, const char* op) {
  require_same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
}

// Elementwise unary op with derivative expressed through input and output.
template <typename Fwd, typename Deriv>
DiffArray unary(const DiffArray& a, const char* op, Fwd fwd, Deriv deriv) {
  require_valid(a, op);
  Matrix out = a.value().unaryExpr(fwd);
  return a.tape()->record(std::move(out), {a}, [deriv](const BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const Matrix& x = *c.in_values[0];
    Matrix& g = *c.in_grads[0];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      g.data()[i] += c.out_grad.data()[i] * deriv(x.data()[i], c.out_value.data()[i]);
    }
  });
}

}  // namespace

const Matrix& DiffArray::value() const {
  if (!tape_) throw ContractError("DiffArray: unbound array");
  return tape_->value(id_);
}

const Matrix& DiffArray::grad() const {
  if (!tape_) throw ContractError("DiffArray: unbound array");
  return tape_->grad(id_);
}

double DiffArray::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("item() on non-scalar array " + shape_string(v));
  return v(0, 0);
}

bool DiffArray::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

DiffArray Tape::push(Node node) {
  node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  nodes_.push_back(std::move(node));
  return DiffArray(this, nodes_.size() - 1);
}

DiffArray Tape::constant(Matrix value) {
  Node n;
  n.kind = Kind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

DiffArray Tape::constant(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

DiffArray Tape::leaf(Matrix value) {
  Node n;
  n.kind = Kind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

DiffArray Tape::parameter(Parameter& p) {
  Node n;
  n.kind = Kind::kParameter;
  n.value = p.value;
  n.requires_grad = true;
  n.sink = &p;
  return push(std::move(n));
}

DiffArray Tape::record(Matrix value, std::vector<DiffArray> parents, BackwardRule rule) {
  Node n;
  n.kind = Kind::kInterior;
  n.value = std::move(value);
  n.parents.reserve(parents.size());
  for (const auto& p : parents) {
    if (p.tape() != this) throw ContractError("record: parent from another tape");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.rule = std::move(rule);
  return push(std::move(n));
}

void Tape::backward(const DiffArray& output) {
  if (output.tape() != this) throw ContractError("backward: output is not on this tape");
  const std::size_t root = output.id();
  if (nodes_[root].value.size() != 1) {
    throw ContractError("backward: output must be scalar, got " + shape_string(nodes_[root].value));
  }

  for (auto& n : nodes_) {
    if (n.kind == Kind::kInterior || n.kind == Kind::kParameter) n.grad.setZero();
  }

  std::vector<char> touched(root + 1, 0);
  nodes_[root].grad(0, 0) += 1.0;
  touched[root] = 1;

  std::vector<const Matrix*> in_values;
  std::vector<Matrix*> in_grads;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!touched[i] || !n.requires_grad || !n.rule) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t pid : n.parents) {
      Node& p = nodes_[pid];
      in_values.push_back(&p.value);
      if (p.requires_grad) {
        in_grads.push_back(&p.grad);
        touched[pid] = 1;
      } else {
        in_grads.push_back(nullptr);
      }
    }
    n.rule(BackwardContext{n.value, n.grad, in_values, in_grads});
  }

  for (std::size_t i = 0; i <= root; ++i) {
    Node& n = nodes_[i];
    if (n.kind == Kind::kParameter && touched[i]) n.sink->grad += n.grad;
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.setZero();
}

DiffArray matmul(const DiffArray& a, const DiffArray& b) {
  require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.in_grads[0]) c.in_grads[0]->noalias() += c.out_grad * c.in_values[1]->transpose();
    if (c.in_grads[1]) c.in_grads[1]->noalias() += c.in_values[0]->transpose() * c.out_grad;
  });
}

DiffArray transpose(const DiffArray& a) {
  require_valid(a, "transpose");
  Matrix out = a.value().transpose();
  return a.tape()->record(std::move(out), {a}, [](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad.transpose();
  });
}

DiffArray add(const DiffArray& a, const DiffArray& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return a.tape()->record(std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad;
    if (c.in_grads[1]) *c.in_grads[1] += c.out_grad;
  });
}

DiffArray sub(const DiffArray& a, const DiffArray& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return a.tape()->record(std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad;
    if (c.in_grads[1]) *c.in_grads[1] -= c.out_grad;
  });
}

DiffArray mul(const DiffArray& a, const DiffArray& b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad.cwiseProduct(*c.in_values[1]);
    if (c.in_grads[1]) *c.in_grads[1] += c.out_grad.cwiseProduct(*c.in_values[0]);
  });
}

DiffArray minimum(const DiffArray& a, const DiffArray& b) {
  require_same_shape(a, b, "minimum");
  Matrix out = a.value().cwiseMin(b.value());
  return a.tape()->record(std::move(out), {a, b}, [](const BackwardContext& c) {
    const Matrix& x = *c.in_values[0];
    const Matrix& y = *c.in_values[1];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const bool first = x.data()[i] <= y.data()[i];
      Matrix* g = first ? c.in_grads[0] : c.in_grads[1];
      if (g) g->data()[i] += c.out_grad.data()[i];
    }
  });
}

DiffArray add_row(const DiffArray& a, const DiffArray& row) {
  require_same_tape(a, row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: expected [1x" + std::to_string(a.cols()) + "] row, got " +
                         shape_string(row.value()) + " for " + shape_string(a.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row}, [](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad;
    if (c.in_grads[1]) *c.in_grads[1] += c.out_grad.colwise().sum();
  });
}

DiffArray mul_row(const DiffArray& a, const DiffArray& row) {
  require_same_tape(a, row, "mul_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("mul_row: expected [1x" + std::to_string(a.cols()) + "] row, got " +
                         shape_string(row.value()) + " for " + shape_string(a.value()));
  }
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape()->record(std::move(out), {a, row}, [](const BackwardContext& c) {
    const Matrix& x = *c.in_values[0];
    const Matrix& r = *c.in_values[1];
    if (c.in_grads[0]) c.in_grads[0]->array() += c.out_grad.array().rowwise() * r.row(0).array();
    if (c.in_grads[1]) *c.in_grads[1] += c.out_grad.cwiseProduct(x).colwise().sum();
  });
}

DiffArray broadcast_scalar(const DiffArray& s, std::size_t rows, std::size_t cols) {
  require_valid(s, "broadcast_scalar");
  if (s.size() != 1) throw DimensionError("broadcast_scalar: expected [1x1], got " + shape_string(s.value()));
  Matrix out = Matrix::Constant(rows, cols, s.item());
  return s.tape()->record(std::move(out), {s}, [](const BackwardContext& c) {
    if (c.in_grads[0]) (*c.in_grads[0])(0, 0) += c.out_grad.sum();
  });
}

DiffArray scale(const DiffArray& a, double factor) {
  require_valid(a, "scale");
  Matrix out = a.value() * factor;
  return a.tape()->record(std::move(out), {a}, [factor](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad * factor;
  });
}

DiffArray add_scalar(const DiffArray& a, double offset) {
  require_valid(a, "add_scalar");
  Matrix out = a.value().array() + offset;
  return a.tape()->record(std::move(out), {a}, [](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad;
  });
}

DiffArray neg(const DiffArray& a) { return scale(a, -1.0); }

DiffArray square(const DiffArray& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

DiffArray sqrt_op(const DiffArray& a) {
  require_valid(a, "sqrt");
  if ((a.value().array() < 0.0).any()) throw DomainError("sqrt: negative input");
  // Subgradient 0 at x = 0.
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

DiffArray exp_op(const DiffArray& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

DiffArray log_op(const DiffArray& a) {
  require_valid(a, "log");
  if ((a.value().array() <= 0.0).any()) throw DomainError("log: non-positive input");
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

DiffArray clamp(const DiffArray& a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: empty interval");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

DiffArray tanh_op(const DiffArray& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

DiffArray sigmoid(const DiffArray& a) {
  return unary(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

DiffArray silu(const DiffArray& a) {
  return unary(
      a, "silu", [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

DiffArray layer_norm(const DiffArray& x, double eps) {
  require_valid(x, "layer_norm");
  const Matrix& v = x.value();
  const Eigen::Index n = v.rows();
  const Eigen::Index d = v.cols();
  if (d < 1) throw DimensionError("layer_norm: zero-width input");
  Matrix out(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = v.row(i).mean();
    const double var = (v.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    out.row(i) = (v.row(i).array() - mu) * inv_std(i);
  }
  return x.tape()->record(std::move(out), {x}, [inv_std](const BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const Matrix& xhat = c.out_value;
    const Matrix& g = c.out_grad;
    Matrix& dx = *c.in_grads[0];
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double g_mean = g.row(i).mean();
      const double gx_mean = g.row(i).cwiseProduct(xhat.row(i)).mean();
      dx.row(i).array() += inv_std(i) * (g.row(i).array() - g_mean - xhat.row(i).array() * gx_mean);
    }
  });
}

DiffArray sum(const DiffArray& a) {
  require_valid(a, "sum");
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [](const BackwardContext& c) {
    if (c.in_grads[0]) c.in_grads[0]->array() += c.out_grad(0, 0);
  });
}

DiffArray mean(const DiffArray& a) {
  require_valid(a, "mean");
  if (a.size() == 0) throw DimensionError("mean: empty array");
  const double inv = 1.0 / static_cast<double>(a.size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() * inv;
  return a.tape()->record(std::move(out), {a}, [inv](const BackwardContext& c) {
    if (c.in_grads[0]) c.in_grads[0]->array() += c.out_grad(0, 0) * inv;
  });
}

DiffArray row_sum(const DiffArray& a) {
  require_valid(a, "row_sum");
  Matrix out = a.value().rowwise().sum();
  return a.tape()->record(std::move(out), {a}, [](const BackwardContext& c) {
    if (c.in_grads[0]) c.in_grads[0]->colwise() += c.out_grad.col(0);
  });
}

DiffArray concat_cols(const DiffArray& a, const DiffArray& b) {
  require_same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols: row counts differ " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
  const Eigen::Index ca = a.cols();
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return a.tape()->record(std::move(out), {a, b}, [ca](const BackwardContext& c) {
    if (c.in_grads[0]) *c.in_grads[0] += c.out_grad.leftCols(ca);
    if (c.in_grads[1]) *c.in_grads[1] += c.out_grad.rightCols(c.out_grad.cols() - ca);
  });
}

DiffArray slice_cols(const DiffArray& a, std::size_t start, std::size_t count) {
  require_valid(a, "slice_cols");
  if (start + count > a.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + shape_string(a.value()));
  }
  const auto s = static_cast<Eigen::Index>(start);
  const auto k = static_cast<Eigen::Index>(count);
  Matrix out = a.value().middleCols(s, k);
  return a.tape()->record(std::move(out), {a}, [s, k](const BackwardContext& c) {
    if (c.in_grads[0]) c.in_grads[0]->middleCols(s, k) += c.out_grad;
  });
}

}  // namespace pacsac::diff
