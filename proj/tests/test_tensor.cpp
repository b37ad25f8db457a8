#include <doctest.h>

#include <cmath>

#include "ddn/ops.hpp"
#include "oracles.hpp"

using namespace ddn;
using Td = Tensor<double>;

namespace {

/// Analytic gradient of f(inputs) w.r.t. every input, compared against
/// central differences. Returns the worst relative error.
double check_op_gradient(std::vector<Td> inputs, const std::function<Td(const std::vector<Td>&)>& f) {
  // Work on private copies: tensors alias storage, and gradients accumulate.
  for (Td& t : inputs) {
    t = t.clone();
    t.set_requires_grad(true);
  }
  // Weight the output by a fixed random field so every output element matters.
  Td probe;
  {
    NoGradScope<double> ng;
    probe = oracle::uniform(f(inputs).shape(), 99, -1.0, 1.0);
  }
  auto loss_of = [&] { return sum(mul(f(inputs), probe)); };
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(loss_of());
  }
  double worst = 0.0;
  for (Td& t : inputs) {
    const auto g = std::as_const(t).grad();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double numeric = oracle::central_difference(t, i, 1e-4, [&] {
        NoGradScope<double> ng;
        return loss_of().item();
      });
      worst = std::max(worst, oracle::relative_error(g[i], numeric));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("construction enforces positive extents and matching sizes") {
    CHECK_THROWS_AS(Td(Shape{2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Td(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    Td t(Shape{2, 3}, 1.5);
    CHECK(t.numel() == 6);
    CHECK(t.data()[5] == 1.5);
    CHECK(Td::scalar(4.0).item() == 4.0);
    CHECK(Td::scalar(4.0).rank() == 0);
  }

  TEST_CASE("copies alias storage while clone is independent") {
    Td a(Shape{3}, std::vector<double>{1, 2, 3});
    Td b = a;
    b.data()[0] = 10;
    CHECK(a.data()[0] == 10);
    Td c = a.clone();
    c.data()[1] = -1;
    CHECK(a.data()[1] == 2);
    CHECK_FALSE(c.shares_storage_with(a));
  }

  TEST_CASE("grad buffer matches shape and const access requires a gradient") {
    Td a(Shape{2, 2});
    const Td& ca = a;
    CHECK_THROWS_AS(ca.grad(), Error);
    CHECK(a.grad().size() == 4);
    CHECK(a.has_grad());
    a.drop_grad();
    CHECK_FALSE(a.has_grad());
  }

  TEST_CASE("cast round trips through float for representable values") {
    Td a(Shape{2}, std::vector<double>{0.5, -2.25});
    Tensor<float> f = a.cast<float>();
    CHECK(f.data()[0] == 0.5f);
    CHECK(identical(f.cast<double>(), a));
  }
}

TEST_SUITE("tape") {
  TEST_CASE("sum gives a gradient of ones") {
    Td a = oracle::uniform({2, 3}, 1);
    a.set_requires_grad(true);
    Tape<double> tape;
    {
      TapeScope<double> s(tape);
      tape.backward(sum(a));
    }
    for (double g : std::as_const(a).grad()) CHECK(g == 1.0);
  }

  TEST_CASE("half squared norm gives the tensor itself") {
    Td a(Shape{3}, std::vector<double>{1, -2, 3});
    a.set_requires_grad(true);
    Tape<double> tape;
    {
      TapeScope<double> s(tape);
      tape.backward(scale(sum(square(a)), 0.5));
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::as_const(a).grad()[i] == doctest::Approx(a.data()[i]));
  }

  TEST_CASE("d/da sum(square(a)) at [1,2,3] is [2,4,6] and matches central differences") {
    Td a(Shape{3}, std::vector<double>{1, 2, 3});
    a.set_requires_grad(true);
    Tape<double> tape;
    {
      TapeScope<double> s(tape);
      tape.backward(sum(square(a)));
    }
    const std::vector<double> expect{2, 4, 6};
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::as_const(a).grad()[i] == doctest::Approx(expect[i]));
      const double fd = oracle::central_difference(a, i, 1e-4, [&] { return sum(square(a)).item(); });
      CHECK(oracle::relative_error(expect[i], fd) < 1e-8);
    }
  }

  TEST_CASE("a tensor used twice receives both contributions") {
    Td a(Shape{2}, std::vector<double>{3, 4});
    a.set_requires_grad(true);
    Tape<double> tape;
    {
      TapeScope<double> s(tape);
      tape.backward(sum(mul(a, a)));
    }
    CHECK(std::as_const(a).grad()[0] == 6.0);
    CHECK(std::as_const(a).grad()[1] == 8.0);
  }

  TEST_CASE("backward rejects non-scalar losses and empty tapes") {
    Td a = oracle::uniform({2, 2}, 2);
    a.set_requires_grad(true);
    Tape<double> tape;
    Td y;
    {
      TapeScope<double> s(tape);
      y = relu(a);
    }
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
    Tape<double> empty;
    CHECK_THROWS_AS(empty.backward(Td::scalar(1.0)), Error);
  }

  TEST_CASE("reset empties the tape and NoGradScope suspends recording") {
    Td a = oracle::uniform({2}, 3);
    a.set_requires_grad(true);
    Tape<double> tape;
    TapeScope<double> s(tape);
    (void)add(a, a);
    CHECK(tape.size() == 1);
    {
      NoGradScope<double> ng;
      (void)add(a, a);
    }
    CHECK(tape.size() == 1);
    tape.reset();
    CHECK(tape.empty());
  }

  TEST_CASE("operations without grad-requiring inputs are not recorded") {
    Tape<double> tape;
    TapeScope<double> s(tape);
    (void)add(oracle::uniform({2}, 4), oracle::uniform({2}, 5));
    CHECK(tape.empty());
  }
}

TEST_SUITE("elementwise") {
  TEST_CASE("relu clamps negatives") {
    const Td r = relu(Td(Shape{3}, std::vector<double>{-1, 0, 2}));
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[1] == 0.0);
    CHECK(r.data()[2] == 2.0);
  }

  TEST_CASE("adding zeros is the identity") {
    const Td a = oracle::uniform({2, 3}, 6);
    CHECK(identical(add(a, Td::zeros_like(a)), a));
  }

  TEST_CASE("dispatcher covers the family and scalar-mul takes a scalar operand") {
    const Td a(Shape{2}, std::vector<double>{1, -2});
    const Td b(Shape{2}, std::vector<double>{3, 5});
    CHECK(elementwise(ElementwiseOp::add, a, b).data()[1] == 3.0);
    CHECK(elementwise(ElementwiseOp::sub, a, b).data()[0] == -2.0);
    CHECK(elementwise(ElementwiseOp::mul, a, b).data()[1] == -10.0);
    CHECK(elementwise(ElementwiseOp::scalar_mul, a, Td::scalar(2.0)).data()[1] == -4.0);
    CHECK(elementwise(ElementwiseOp::relu, a, Td()).data()[1] == 0.0);
    CHECK(elementwise(ElementwiseOp::square, a, Td()).data()[1] == 4.0);
  }

  TEST_CASE("shape mismatch names both shapes") {
    try {
      (void)add(Td(Shape{2, 3}), Td(Shape{3, 2}));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string what = e.what();
      CHECK(what.find("[2,3]") != std::string::npos);
      CHECK(what.find("[3,2]") != std::string::npos);
    }
  }

  TEST_CASE("non-finite results raise NumericError") {
    const Td a(Shape{1}, std::vector<double>{1.0});
    const Td z(Shape{1}, std::vector<double>{0.0});
    CHECK_THROWS_AS(div(a, z), NumericError);
  }

  TEST_CASE("element-wise gradients match finite differences") {
    const Td a = oracle::uniform({2, 3}, 7, -1, 1);
    const Td b = oracle::uniform({2, 3}, 8, 0.5, 1.5);
    CHECK(check_op_gradient({a, b}, [](auto& v) { return add(v[0], v[1]); }) < 1e-6);
    CHECK(check_op_gradient({a, b}, [](auto& v) { return sub(v[0], v[1]); }) < 1e-6);
    CHECK(check_op_gradient({a, b}, [](auto& v) { return mul(v[0], v[1]); }) < 1e-6);
    CHECK(check_op_gradient({a, b}, [](auto& v) { return div(v[0], v[1]); }) < 1e-6);
    CHECK(check_op_gradient({a}, [](auto& v) { return scale(v[0], 2.5); }) < 1e-6);
    CHECK(check_op_gradient({a}, [](auto& v) { return add_scalar(v[0], 2.5); }) < 1e-6);
    CHECK(check_op_gradient({a}, [](auto& v) { return square(v[0]); }) < 1e-6);
    CHECK(check_op_gradient({a}, [](auto& v) { return relu(v[0]); }) < 1e-6);
    CHECK(check_op_gradient({b}, [](auto& v) { return pow_positive(v[0], 0.3); }) < 1e-6);
    CHECK(check_op_gradient({a}, [](auto& v) { return mean_per_sample(v[0]); }) < 1e-6);
    CHECK(check_op_gradient({a}, [](auto& v) { return mean(v[0]); }) < 1e-6);
  }
}
