#include "pacsac/optim.hpp"

#include <cmath>

namespace pacsac::diff {

namespace {

void require_matching(std::span<Parameter* const> a, std::span<Parameter* const> b, const char* op) {
  if (a.size() != b.size()) {
    throw ContractError(std::string(op) + ": parameter lists differ in length (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->value.rows() != b[i]->value.rows() || a[i]->value.cols() != b[i]->value.cols()) {
      throw ContractError(std::string(op) + ": shape mismatch for " + a[i]->name + " " +
                          shape_string(a[i]->value) + " vs " + shape_string(b[i]->value));
    }
  }
}

}  // namespace

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ContractError("Adam::step: parameter list changed between steps");

  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  const double eps = options_.epsilon;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

void polyak_update(std::span<Parameter* const> target, std::span<Parameter* const> online, double tau) {
  require_matching(target, online, "polyak_update");
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i]->value = tau * online[i]->value + (1.0 - tau) * target[i]->value;
  }
}

void copy_values(std::span<Parameter* const> to, std::span<Parameter* const> from) {
  require_matching(to, from, "copy_values");
  for (std::size_t i = 0; i < to.size(); ++i) to[i]->value = from[i]->value;
}

std::size_t parameter_count(std::span<Parameter* const> params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

}  // namespace pacsac::diff
