// Copyright 2026 frcrn-cpp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "frcrn/grad_check.h"
#include "frcrn/tensor.h"

using namespace frcrn;

TEST_CASE("complex multiply of a conjugate pair gives |a|^2") {
  CTensor a(Tensor::scalar(1.0), Tensor::scalar(1.0));
  CTensor b(Tensor::scalar(1.0), Tensor::scalar(-1.0));
  CTensor c = cmul(a, b);
  CHECK(c.re.item() == doctest::Approx(2.0));
  CHECK(c.im.item() == doctest::Approx(0.0));
}

TEST_CASE("complex multiply matches the four-real-multiply expansion") {
  std::mt19937_64 rng(7);
  CTensor a(Tensor::randn({3, 4}, rng), Tensor::randn({3, 4}, rng));
  CTensor b(Tensor::randn({3, 4}, rng), Tensor::randn({3, 4}, rng));
  CTensor c = cmul(a, b);
  Tensor re = sub(mul(a.re, b.re), mul(a.im, b.im));
  Tensor im = add(mul(a.re, b.im), mul(a.im, b.re));
  for (int64_t i = 0; i < re.numel(); ++i) {
    CHECK(c.re.data()[i] == re.data()[i]);  // bit-for-bit
    CHECK(c.im.data()[i] == im.data()[i]);
  }
}

TEST_CASE("tanh fixed point and derivative at zero") {
  Tensor x = Tensor::zeros({3}, true);
  CHECK(tanh_op(x).data()[0] == 0.0);

  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = sum_all(tanh_op(x));
  tape.backward(y);
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("leaky relu value and slope at a negative input") {
  const double s = 0.2;
  Tensor x = Tensor::from_data({1}, {-1.0}, true);
  Tensor y = leaky_relu(x, s);
  CHECK(y.item() == doctest::Approx(-s));

  auto rep = grad_check([&] { return sum_all(leaky_relu(x, s)); }, {x}, 1e-6,
                        1e-6);
  CHECK(rep.pass);

  Tape tape;
  Tape::Scope scope(tape);
  Tensor loss = sum_all(leaky_relu(x, s));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(s));
}

TEST_CASE("permute reorders axes") {
  std::mt19937_64 rng(3);
  Tensor a = Tensor::randn({2, 3, 4}, rng);
  Tensor p = permute(a, {1, 2, 0});
  CHECK(p.shape() == Shape{3, 4, 2});
  CHECK(p.at({1, 2, 0}) == a.at({0, 1, 2}));
  CHECK(p.at({2, 3, 1}) == a.at({1, 2, 3}));
}

TEST_CASE("sum over all axes of ones") {
  Tensor a = Tensor::ones({3, 4});
  CHECK(sum_all(a).item() == doctest::Approx(12.0));
}

TEST_CASE("concat forward shape and backward split") {
  Tensor a = Tensor::ones({1, 2}, true);
  Tensor b = Tensor::full({1, 2}, 2.0, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor c = concat({a, b}, 0);
  CHECK(c.shape() == Shape{2, 2});
  Tensor loss = sum_all(c);
  tape.backward(loss);
  for (double g : a.grad()) CHECK(g == doctest::Approx(1.0));
  for (double g : b.grad()) CHECK(g == doctest::Approx(1.0));

  auto rep = grad_check(
      [&] {
        return sum_all(mul(concat({a, b}, 0), concat({a, b}, 0)));
      },
      {a, b}, 1e-6, 1e-6);
  CHECK(rep.pass);
}

TEST_CASE("grad_check on a quadratic is near-exact") {
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0}, true);
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor y = sum_all(mul(x, x));
    tape.backward(y);
  }
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));

  auto rep = grad_check([&] { return sum_all(mul(x, x)); }, {x}, 1e-5, 1e-8);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-8);
}

TEST_CASE("reshape twice is the identity on data") {
  std::mt19937_64 rng(11);
  Tensor a = Tensor::randn({4, 6}, rng);
  Tensor b = reshape(reshape(a, {3, 8}), {4, 6});
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("reshape rejects element-count changes") {
  Tensor a = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(reshape(a, {7}), ShapeError);
}

TEST_CASE("broadcasting: size-1 and missing leading axes only") {
  Tensor a = Tensor::ones({2, 3, 4});
  Tensor b = Tensor::full({4}, 2.0);
  Tensor c = add(a, b);
  CHECK(c.shape() == Shape{2, 3, 4});
  CHECK(c.data()[0] == doctest::Approx(3.0));

  Tensor d = Tensor::full({2, 1, 4}, 3.0);
  Tensor e = mul(a, d);
  CHECK(e.shape() == Shape{2, 3, 4});
  CHECK(e.data()[5] == doctest::Approx(3.0));

  Tensor bad = Tensor::zeros({3, 5});
  CHECK_THROWS_AS(add(a, bad), ShapeError);
}

TEST_CASE("broadcast backward reduces over expanded axes") {
  Tensor a = Tensor::ones({2, 3}, true);
  Tensor b = Tensor::full({3}, 2.0, true);
  auto rep = grad_check(
      [&] { return sum_all(mul(mul(a, b), mul(a, b))); }, {a, b}, 1e-5, 1e-6);
  CHECK(rep.pass);

  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = sum_all(mul(a, b));
  tape.backward(y);
  // each element of b touches two output elements
  for (double g : b.grad()) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("every elementwise and shape op passes grad_check on random input") {
  std::mt19937_64 rng(17);
  auto mk = [&](bool positive = false) {
    Tensor t = positive ? Tensor::uniform({2, 3, 2}, rng, 0.5, 2.0)
                        : Tensor::randn({2, 3, 2}, rng);
    t.set_requires_grad(true);
    return t;
  };

  struct Case {
    const char* name;
    std::function<Tensor(const Tensor&)> f;
    bool positive;
  };
  std::vector<Case> cases = {
      {"tanh", [](const Tensor& x) { return tanh_op(x); }, false},
      {"sigmoid", [](const Tensor& x) { return sigmoid(x); }, false},
      {"relu", [](const Tensor& x) { return relu(x); }, false},
      {"leaky", [](const Tensor& x) { return leaky_relu(x, 0.01); }, false},
      {"exp", [](const Tensor& x) { return exp_op(x); }, false},
      {"log", [](const Tensor& x) { return log_op(x); }, true},
      {"sqrt", [](const Tensor& x) { return sqrt_op(x); }, true},
      {"clamp", [](const Tensor& x) { return clamp(x, -0.7, 0.7); }, false},
      {"add_s", [](const Tensor& x) { return add_scalar(x, 1.5); }, false},
      {"mul_s", [](const Tensor& x) { return mul_scalar(x, -2.5); }, false},
      {"neg", [](const Tensor& x) { return neg(x); }, false},
      {"sum_ax",
       [](const Tensor& x) { return sum(x, {1}, false); }, false},
      {"mean_ax",
       [](const Tensor& x) { return mean(x, {0, 2}, true); }, false},
      {"rmax", [](const Tensor& x) { return reduce_max(x, 1); }, false},
      {"reshape", [](const Tensor& x) { return reshape(x, {6, 2}); }, false},
      {"permute", [](const Tensor& x) { return permute(x, {2, 0, 1}); }, false},
      {"slice", [](const Tensor& x) { return slice(x, 1, 1, 2); }, false},
      {"pad", [](const Tensor& x) { return pad(x, 1, 2, 1); }, false},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    Tensor x = mk(c.positive);
    auto rep = grad_check(
        [&] {
          Tensor y = c.f(x);
          return sum_all(mul(y, y));
        },
        {x}, 1e-5, 1e-4);
    CHECK_MESSAGE(rep.pass, c.name, ": ", rep.detail);
  }

  // binary ops
  Tensor a = mk(), b = mk(true);
  for (auto [name, f] : std::vector<std::pair<
           const char*, std::function<Tensor(const Tensor&, const Tensor&)>>>{
           {"add", [](const Tensor& x, const Tensor& y) { return add(x, y); }},
           {"sub", [](const Tensor& x, const Tensor& y) { return sub(x, y); }},
           {"mul", [](const Tensor& x, const Tensor& y) { return mul(x, y); }},
           {"div",
            [](const Tensor& x, const Tensor& y) { return div(x, y); }}}) {
    CAPTURE(name);
    auto rep = grad_check(
        [&, f = f] {
          Tensor y = f(a, b);
          return sum_all(mul(y, y));
        },
        {a, b}, 1e-5, 1e-4);
    CHECK_MESSAGE(rep.pass, name, ": ", rep.detail);
  }

  // matmul
  Tensor ma = Tensor::randn({3, 4}, rng);
  Tensor mb = Tensor::randn({4, 2}, rng);
  ma.set_requires_grad(true);
  mb.set_requires_grad(true);
  auto rep = grad_check(
      [&] {
        Tensor y = matmul(ma, mb);
        return sum_all(mul(y, y));
      },
      {ma, mb}, 1e-5, 1e-4);
  CHECK_MESSAGE(rep.pass, rep.detail);

  // complex multiply through both planes
  CTensor ca(mk(), mk());
  CTensor cb(mk(), mk());
  auto crep = grad_check(
      [&] {
        CTensor y = cmul(ca, cb);
        return sum_all(add(mul(y.re, y.re), mul(y.im, y.im)));
      },
      {ca.re, ca.im, cb.re, cb.im}, 1e-5, 1e-4);
  CHECK_MESSAGE(crep.pass, crep.detail);
}

TEST_CASE("gradients accumulate exactly once per contribution") {
  // x used twice: d/dx sum(x*x + 3x) = 2x + 3
  Tensor x = Tensor::from_data({2}, {1.0, -2.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = sum_all(add(mul(x, x), mul_scalar(x, 3.0)));
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(5.0));
  CHECK(x.grad()[1] == doctest::Approx(-1.0));
}

TEST_CASE("no tape means no history and no grads") {
  Tensor x = Tensor::ones({2}, true);
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(x.grad().empty());
}

TEST_CASE("leaf grad map keeps parameter grads out of the node") {
  Tensor x = Tensor::from_data({2}, {2.0, 3.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = sum_all(mul(x, x));
  Tape::LeafGradMap sink;
  tape.backward(y, &sink);
  CHECK(x.grad().empty());
  REQUIRE(sink.count(x.node()) == 1);
  CHECK(sink[x.node()][0] == doctest::Approx(4.0));
  CHECK(sink[x.node()][1] == doctest::Approx(6.0));
}

TEST_CASE("grad_check flags non-finite values") {
  Tensor x = Tensor::from_data({1}, {-1.0}, true);
  auto rep = grad_check([&] { return log_op(x); }, {x}, 1e-5, 1e-4);
  CHECK_FALSE(rep.pass);
  CHECK(rep.detail.find("non-finite") != std::string::npos);
}

TEST_CASE("reduce_max routes gradient to the argmax") {
  Tensor x = Tensor::from_data({2, 3}, {1.0, 5.0, 2.0, 4.0, 0.0, -1.0}, true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = sum_all(reduce_max(x, 1));
  tape.backward(y);
  std::vector<double> want = {0, 1, 0, 1, 0, 0};
  for (int i = 0; i < 6; ++i) CHECK(x.grad()[i] == doctest::Approx(want[i]));
}
