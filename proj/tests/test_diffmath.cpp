#include "oracles.hpp"

#include "pacsac/diffmath.hpp"
#include "pacsac/gradcheck.hpp"
#include "pacsac/optim.hpp"
#include "pacsac/rng.hpp"

#include <doctest.h>

using namespace pacsac;
using namespace pacsac::diff;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  Eigen::Index i = 0;
  for (auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Gradient of f(x) = op(x) summed with fixed weights, via the tape.
Matrix tape_gradient(const std::function<DiffArray(const DiffArray&)>& op, const Matrix& x, const Matrix& w) {
  Tape tape;
  DiffArray leaf = tape.leaf(x);
  tape.backward(sum(op(leaf) * tape.constant(w)));
  return leaf.grad();
}

double tape_value(const std::function<DiffArray(const DiffArray&)>& op, const Matrix& x, const Matrix& w) {
  Tape tape;
  return sum(op(tape.constant(x)) * tape.constant(w)).item();
}

void check_unary(const std::function<DiffArray(const DiffArray&)>& op, const Matrix& x, double tol) {
  Tape probe;
  const DiffArray y = op(probe.constant(x));
  Matrix wy = Matrix::Constant(y.rows(), y.cols(), 0.7);
  for (Eigen::Index i = 0; i < wy.size(); ++i) wy.data()[i] += 0.1 * static_cast<double>(i % 5);
  const Matrix analytic = tape_gradient(op, x, wy);
  const Matrix numeric = oracle::numeric_gradient([&](const Matrix& v) { return tape_value(op, v, wy); }, x);
  CHECK(oracle::max_error(analytic, numeric) < tol);
}

}  // namespace

TEST_SUITE("diffmath") {
  TEST_CASE("matmul arithmetic") {
    Tape t;
    auto y = matmul(t.constant(mat({{1, 2}, {3, 4}})), t.constant(mat({{1}, {1}})));
    CHECK(y.value() == mat({{3}, {7}}));
    auto id = matmul(t.constant(Matrix::Identity(2, 2)), t.constant(mat({{5, 6}, {7, 8}})));
    CHECK(id.value() == mat({{5, 6}, {7, 8}}));
  }

  TEST_CASE("matmul dimension error names both shapes") {
    Tape t;
    try {
      matmul(t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(2, 3)));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string what = e.what();
      CHECK(what.find("2x3") != std::string::npos);
    }
  }

  TEST_CASE("matmul gradient vs finite differences") {
    RandomStream rng(3, "t");
    const Matrix a = rng.uniform_matrix(3, 4, -2, 2);
    const Matrix b = rng.uniform_matrix(4, 2, -2, 2);
    Tape t;
    auto la = t.leaf(a);
    auto lb = t.leaf(b);
    t.backward(sum(matmul(la, lb)));
    auto fa = [&](const Matrix& x) { return (x * b).sum(); };
    auto fb = [&](const Matrix& x) { return (a * x).sum(); };
    CHECK(oracle::max_error(la.grad(), oracle::numeric_gradient(fa, a)) < 1e-4);
    CHECK(oracle::max_error(lb.grad(), oracle::numeric_gradient(fb, b)) < 1e-4);
  }

  TEST_CASE("silu values and gradient") {
    Tape t;
    CHECK(silu(t.constant(0.0)).item() == doctest::Approx(0.0));
    CHECK(silu(t.constant(40.0)).item() == doctest::Approx(40.0));
    check_unary([](const DiffArray& x) { return silu(x); }, mat({{1.5}}), 1e-5);
  }

  TEST_CASE("tanh values, saturation and gradient") {
    Tape t;
    auto z = t.leaf(mat({{0.0}}));
    t.backward(sum(tanh_op(z)));
    CHECK(tanh_op(z).item() == 0.0);
    CHECK(z.grad()(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(tanh_op(t.constant(30.0)).item() - 1.0) < 1e-12);
    CHECK(std::abs(tanh_op(t.constant(-30.0)).item() + 1.0) < 1e-12);
    check_unary([](const DiffArray& x) { return tanh_op(x); }, mat({{0.7}}), 1e-5);
  }

  TEST_CASE("layer_norm") {
    Tape t;
    auto y = layer_norm(t.constant(mat({{2, 2, 2, 2}})));
    CHECK(y.value().cwiseAbs().maxCoeff() == 0.0);
    auto u = layer_norm(t.constant(mat({{1, -1}})), 1e-14);
    CHECK(u.value()(0, 0) == doctest::Approx(1.0));
    CHECK(u.value()(0, 1) == doctest::Approx(-1.0));
    RandomStream rng(5, "t");
    check_unary([](const DiffArray& x) { return layer_norm(x); }, rng.uniform_matrix(2, 5, -2, 2), 1e-4);
  }

  TEST_CASE("reductions and elementwise arithmetic") {
    Tape t;
    auto x = t.leaf(mat({{1, 2, 3}}));
    auto m = mean(x);
    CHECK(m.item() == doctest::Approx(2.0));
    t.backward(m);
    for (int i = 0; i < 3; ++i) CHECK(x.grad()(0, i) == doctest::Approx(1.0 / 3.0));
    CHECK(sum(square(t.constant(mat({{3, 4}})))).item() == doctest::Approx(25.0));
  }

  TEST_CASE("every primitive matches central differences on random inputs") {
    RandomStream rng(11, "t");
    std::vector<std::pair<const char*, std::function<DiffArray(const DiffArray&)>>> ops = {
        {"square", [](auto& x) { return square(x); }},
        {"exp", [](auto& x) { return exp_op(x); }},
        {"sigmoid", [](auto& x) { return sigmoid(x); }},
        {"silu", [](auto& x) { return silu(x); }},
        {"tanh", [](auto& x) { return tanh_op(x); }},
        {"neg", [](auto& x) { return neg(x); }},
        {"scale", [](auto& x) { return scale(x, 2.5); }},
        {"add_scalar", [](auto& x) { return add_scalar(x, -0.3); }},
        {"transpose", [](auto& x) { return transpose(x); }},
        {"row_sum", [](auto& x) { return row_sum(x); }},
        {"layer_norm", [](auto& x) { return layer_norm(x); }},
        {"slice_cols", [](auto& x) { return slice_cols(x, 1, 2); }},
        {"mean", [](auto& x) { return mean(x); }},
        {"self product", [](auto& x) { return x * x * x; }},
        {"composed", [](auto& x) { return tanh_op(matmul(x, transpose(x))); }},
    };
    for (auto& [name, op] : ops) {
      CAPTURE(name);
      for (int k = 0; k < 20; ++k) {
        const Matrix x = rng.uniform_matrix(3, 4, -2, 2);
        check_unary(op, x, 1e-4);
      }
    }
    for (int k = 0; k < 20; ++k) {
      const Matrix x = rng.uniform_matrix(2, 3, 0.2, 2);
      check_unary([](const DiffArray& v) { return log_op(v); }, x, 1e-4);
      check_unary([](const DiffArray& v) { return sqrt_op(v); }, x, 1e-4);
    }
  }

  TEST_CASE("binary primitives match central differences") {
    RandomStream rng(12, "t");
    using Bin = std::function<DiffArray(const DiffArray&, const DiffArray&)>;
    std::vector<std::tuple<const char*, Bin, int, int>> ops = {
        {"add", [](auto& a, auto& b) { return a + b; }, 3, 3},
        {"sub", [](auto& a, auto& b) { return a - b; }, 3, 3},
        {"mul", [](auto& a, auto& b) { return a * b; }, 3, 3},
        {"minimum", [](auto& a, auto& b) { return minimum(a, b); }, 3, 3},
        {"add_row", [](auto& a, auto& b) { return add_row(a, b); }, 3, 1},
        {"mul_row", [](auto& a, auto& b) { return mul_row(a, b); }, 3, 1},
        {"concat_cols", [](auto& a, auto& b) { return concat_cols(a, b); }, 3, 3},
    };
    for (auto& [name, op, rows_a, rows_b] : ops) {
      CAPTURE(name);
      for (int k = 0; k < 20; ++k) {
        const Matrix a = rng.uniform_matrix(rows_a, 4, -2, 2);
        const Matrix b = rng.uniform_matrix(rows_b, 4, -2, 2);
        check_unary([&](const DiffArray& x) { return op(x, x.tape()->constant(b)); }, a, 1e-4);
        check_unary([&](const DiffArray& x) { return op(x.tape()->constant(a), x); }, b, 1e-4);
      }
    }
  }

  TEST_CASE("clamp passes gradient inside the interval only") {
    Tape t;
    auto x = t.leaf(mat({{-2, -1, 0.5, 1, 3}}));
    t.backward(sum(clamp(x, -1, 1)));
    CHECK(x.grad() == mat({{0, 1, 1, 1, 0}}));
  }

  TEST_CASE("log of a non-positive value is a domain error") {
    Tape t;
    CHECK_THROWS_AS(log_op(t.constant(mat({{1, 0}}))), DomainError);
    CHECK_THROWS_AS(log_op(t.constant(-1.0)), DomainError);
  }

  TEST_CASE("backward semantics") {
    Tape t;
    auto x = t.leaf(mat({{2.0}}));
    t.backward(x);
    CHECK(x.grad()(0, 0) == 1.0);

    Tape t2;
    auto a = t2.leaf(mat({{1, 2, 3}}));
    auto b = t2.leaf(mat({{4, 5, 6}}));
    auto out = sum(a * b);
    t2.backward(out);
    CHECK(a.grad() == mat({{4, 5, 6}}));
    t2.backward(out);
    CHECK(a.grad() == mat({{8, 10, 12}}));
    t2.zero_grad();
    t2.backward(out);
    CHECK(a.grad() == mat({{4, 5, 6}}));
    CHECK(out.grad()(0, 0) == 1.0);

    CHECK_THROWS_AS(t2.backward(a), ContractError);
  }

  TEST_CASE("constants never receive gradient") {
    Tape t;
    auto c = t.constant(mat({{1, 2}}));
    auto x = t.leaf(mat({{3, 4}}));
    t.backward(sum(c * x));
    CHECK_FALSE(c.requires_grad());
    CHECK(c.grad().cwiseAbs().sum() == 0.0);
  }

  TEST_CASE("parameter gradients flush and repeat bit-identically") {
    RandomStream rng(2, "t");
    Parameter w("w", rng.uniform_matrix(4, 3, -1, 1));
    const Matrix x = rng.uniform_matrix(5, 4, -1, 1);
    auto run = [&] {
      w.zero_grad();
      Tape t;
      t.backward(mean(silu(layer_norm(matmul(t.constant(x), t.parameter(w))))));
      return w.grad;
    };
    const Matrix g1 = run();
    const Matrix g2 = run();
    CHECK(g1 == g2);
    CHECK(g1.cwiseAbs().sum() > 0.0);
  }

  TEST_CASE("library gradcheck agrees with the test oracle") {
    RandomStream rng(4, "t");
    auto res = check_gradient(
        [](Tape&, std::span<const DiffArray> in) { return sum(exp_op(in[0]) * tanh_op(in[1])); },
        {rng.uniform_matrix(2, 2, -2, 2), rng.uniform_matrix(2, 2, -2, 2)});
    CHECK(res.passed());
    CHECK(res.checked == 8);
  }
}

TEST_SUITE("optim") {
  TEST_CASE("polyak update") {
    Parameter target("t", Matrix::Zero(1, 2));
    Parameter online("o", Matrix::Constant(1, 2, 2.0));
    std::vector<Parameter*> tp{&target}, op{&online};
    polyak_update(tp, op, 0.5);
    CHECK(target.value(0, 0) == 1.0);
    polyak_update(tp, op, 0.0);
    CHECK(target.value(0, 0) == 1.0);
    polyak_update(tp, op, 1.0);
    CHECK(target.value == online.value);
    Parameter wrong("w", Matrix::Zero(2, 2));
    std::vector<Parameter*> wp{&wrong};
    CHECK_THROWS_AS(polyak_update(wp, op, 0.5), ContractError);
  }

  TEST_CASE("adam first step moves by the learning rate against the gradient sign") {
    Parameter p("p", mat({{1.0, -1.0}}));
    p.grad = mat({{0.3, -5.0}});
    Adam opt({1e-3, 0.9, 0.999, 1e-8});
    std::vector<Parameter*> ps{&p};
    opt.step(ps);
    CHECK(p.value(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(p.value(0, 1) == doctest::Approx(-1.0 + 1e-3).epsilon(1e-6));
  }

  TEST_CASE("adam minimizes a quadratic") {
    Parameter p("p", mat({{3.0, -2.0}}));
    Adam opt({0.05, 0.9, 0.999, 1e-8});
    std::vector<Parameter*> ps{&p};
    for (int i = 0; i < 2000; ++i) {
      zero_grad(ps);
      Tape t;
      t.backward(sum(square(t.parameter(p))));
      opt.step(ps);
    }
    CHECK(p.value.cwiseAbs().maxCoeff() < 1e-3);
  }
}
