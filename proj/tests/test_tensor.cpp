#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "multilogue/errors.hpp"
#include "multilogue/grad_check.hpp"
#include "multilogue/rng.hpp"
#include "multilogue/tensor.hpp"

using namespace multilogue;

namespace {

Tensor random_param(Shape shape, Rng& rng, double span = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-span, span);
  return Tensor::parameter(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul identity and hand product") {
  const Tensor eye = Tensor::constant({2, 2}, {1, 0, 0, 1});
  const Tensor a = Tensor::constant({2, 2}, {1, 2, 3, 4});
  const Tensor prod = matmul(eye, a);
  CHECK(prod.values() == std::vector<double>{1, 2, 3, 4});

  const Tensor row_vec = Tensor::constant({1, 2}, {1, 2});
  const Tensor col_vec = Tensor::constant({2, 1}, {3, 4});
  CHECK(matmul(row_vec, col_vec).values() == std::vector<double>{11});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), DimensionError);
  try {
    matmul(a, b);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches central finite differences") {
  Rng rng(7);
  Tensor a = random_param({3, 4}, rng);
  Tensor b = random_param({4, 2}, rng);
  const auto report = grad_check(
      "matmul", [&] { return sum(tanh(matmul(a, b))); }, {{"a", a}, {"b", b}}, 1e-5);
  CHECK(report.max_rel_err < 1e-6);
  CHECK(report.deterministic);
}

TEST_CASE("softmax uniform, single element, shift invariance") {
  const Tensor flat = softmax(Tensor::constant({3}, {0, 0, 0}), 0);
  for (double v : flat.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  CHECK(softmax(Tensor::constant({1}, {2.7}), 0).values()[0] == doctest::Approx(1.0));

  const Tensor lo = softmax(Tensor::constant({3}, {1, 2, 3}), 0);
  const Tensor hi = softmax(Tensor::constant({3}, {101, 102, 103}), 0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(lo.values()[i] == hi.values()[i]);
}

TEST_CASE("softmax rows sum to one and stay positive") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_param({4, 5}, rng, 6.0);
    const Tensor y = softmax(x, 1);
    for (std::size_t i = 0; i < 4; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(y.at(i, j) > 0.0);
        total += y.at(i, j);
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("softmax empty axis is a domain error") {
  const Tensor empty = Tensor::zeros({0});
  CHECK_THROWS_AS(softmax(empty, 0), DomainError);
}

TEST_CASE("softmax gradient via finite differences, both axes") {
  Rng rng(13);
  for (std::size_t axis : {std::size_t{0}, std::size_t{1}}) {
    Tensor x = random_param({3, 4}, rng, 2.0);
    Tensor w = random_param({3, 4}, rng);
    const auto report = grad_check(
        "softmax", [&] { return sum(mul(softmax(x, axis), w)); }, {{"x", x}}, 1e-5);
    CHECK(report.max_rel_err < 1e-6);
  }
}

TEST_CASE("elementwise identities and gradients") {
  Rng rng(17);
  Tensor x = random_param({5}, rng);
  CHECK(mul(x, Tensor::ones({5})).values() == x.values());
  CHECK(add(x, Tensor::zeros({5})).values() == x.values());
  CHECK(elementwise(x, Tensor::ones({5}), EltKind::mul).values() == x.values());
  CHECK(elementwise(x, Tensor::zeros({5}), EltKind::add).values() == x.values());

  Tensor a = random_param({4}, rng);
  Tensor b = random_param({4}, rng);
  const auto report = grad_check(
      "mul", [&] { return sum(mul(a, b)); }, {{"a", a}, {"b", b}}, 1e-5);
  CHECK(report.max_rel_err < 1e-6);

  CHECK_THROWS_AS(add(Tensor::zeros({3}), Tensor::zeros({4})), DimensionError);
}

TEST_CASE("concat trivial cases") {
  const Tensor v = Tensor::constant({3}, {1, 2, 3});
  CHECK(concat({v}, 0).values() == v.values());

  const Tensor left = Tensor::constant({2, 1}, {1, 2});
  const Tensor right = Tensor::constant({2, 1}, {3, 4});
  const Tensor joined = concat({left, right}, 1);
  CHECK(joined.shape() == Shape{2, 2});
  CHECK(joined.values() == std::vector<double>{1, 3, 2, 4});

  CHECK_THROWS_AS(concat({Tensor::zeros({2, 2}), Tensor::zeros({3, 3})}, 0), DimensionError);
}

TEST_CASE("concat routes gradient of a sum back as ones") {
  Tensor a = Tensor::parameter({2}, {1, 2});
  Tensor b = Tensor::parameter({3}, {3, 4, 5});
  backward(sum(concat({a, b}, 0)));
  CHECK(a.grad() == std::vector<double>{1, 1});
  CHECK(b.grad() == std::vector<double>{1, 1, 1});
}

TEST_CASE("concat then slice-back is the identity on each part") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t axis = rng.integer(2);
    const std::size_t fixed = 1 + rng.integer(4);
    std::vector<Tensor> parts;
    std::vector<std::size_t> extents;
    const std::size_t n_parts = 1 + rng.integer(3);
    for (std::size_t p = 0; p < n_parts; ++p) {
      const std::size_t e = 1 + rng.integer(4);
      extents.push_back(e);
      Shape shape = axis == 0 ? Shape{e, fixed} : Shape{fixed, e};
      parts.push_back(random_param(shape, rng));
    }
    const Tensor joined = concat(parts, axis);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < n_parts; ++p) {
      const Tensor back = slice(joined, axis, offset, extents[p]);
      CHECK(back.values() == parts[p].values());
      offset += extents[p];
    }
  }
}

TEST_CASE("activations at reference points") {
  CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(relu(Tensor::constant({2}, {-5, 5})).values() == std::vector<double>{0, 5});
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(activation(Tensor::scalar(0.3), Activation::tanh).item() == std::tanh(0.3));

  Rng rng(23);
  Tensor x = random_param({6}, rng, 2.0);
  for (double v : tanh(x).values()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  for (double v : relu(x).values()) CHECK(v >= 0.0);
}

TEST_CASE("activation rejects non-finite input") {
  Tensor x = Tensor::parameter({1}, {1.0});
  x.values_mut()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(tanh(x), DomainError);
  CHECK_THROWS_AS(softmax(x, 0), DomainError);
}

TEST_CASE("backward of sum gives ones, of dot gives 2x") {
  Tensor x = Tensor::parameter({4}, {1, -2, 3, 0.5});
  backward(sum(x));
  CHECK(x.grad() == std::vector<double>{1, 1, 1, 1});

  Tensor y = Tensor::parameter({3}, {1, 2, -3});
  backward(dot(y, y));
  CHECK(y.grad() == std::vector<double>{2, 4, -6});
}

TEST_CASE("backward called twice accumulates exactly twice the gradient") {
  Rng rng(29);
  Tensor x = random_param({5}, rng);
  const Tensor loss = sum(mul(x, x));
  backward(loss);
  const std::vector<double> once = x.grad();
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(x.grad()[i] == 2.0 * once[i]);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::parameter({2}, {1, 2});
  CHECK_THROWS_AS(backward(mul(x, x)), ContractError);
}

TEST_CASE("zero_grad resets accumulation") {
  Tensor x = Tensor::parameter({2}, {3, 4});
  backward(sum(x));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
  backward(sum(x));
  CHECK(x.grad() == std::vector<double>{1, 1});
}

TEST_CASE("reused subexpression accumulates both paths") {
  // loss = sum(x*x) + sum(x), so dloss/dx = 2x + 1.
  Tensor x = Tensor::parameter({3}, {1, 2, 3});
  backward(add(sum(mul(x, x)), sum(x)));
  CHECK(x.grad() == std::vector<double>{3, 5, 7});
}

TEST_CASE("transpose, reshape, row, stack_rows round trips") {
  const Tensor m = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(transpose(m).shape() == Shape{3, 2});
  CHECK(transpose(transpose(m)).values() == m.values());
  CHECK(row(m, 1).values() == std::vector<double>{4, 5, 6});
  CHECK(reshape(m, {3, 2}).values() == m.values());
  CHECK_THROWS_AS(reshape(m, {4, 2}), DimensionError);

  const Tensor r0 = Tensor::constant({3}, {1, 2, 3});
  const Tensor r1 = Tensor::constant({3}, {4, 5, 6});
  CHECK(stack_rows({r0, r1}).values() == m.values());
}

TEST_CASE("add_all n-ary sum and gradient fan-out") {
  Tensor a = Tensor::parameter({2}, {1, 2});
  Tensor b = Tensor::parameter({2}, {10, 20});
  const Tensor total = add_all({a, b, a});
  CHECK(total.values() == std::vector<double>{12, 24});
  backward(sum(total));
  CHECK(a.grad() == std::vector<double>{2, 2});
  CHECK(b.grad() == std::vector<double>{1, 1});
}

TEST_CASE("grad_check is exact for linear functions") {
  Rng rng(31);
  Tensor x = random_param({6}, rng);
  const Tensor w = Tensor::constant({6}, {2, -1, 0.5, 3, -2, 1});
  const auto report = grad_check("linear", [&] { return dot(x, w); }, {{"x", x}}, 1e-5);
  CHECK(report.max_rel_err < 1e-9);
  CHECK(report.max_rel_err >= 0.0);
}

TEST_CASE("grad_check max_rel_err equals worst per-param error") {
  Rng rng(37);
  Tensor a = random_param({3}, rng);
  Tensor b = random_param({3}, rng);
  const auto report = grad_check(
      "pair", [&] { return add(sum(mul(a, a)), sum(tanh(b))); }, {{"a", a}, {"b", b}}, 1e-5);
  double worst = 0.0;
  for (const auto& [name, err] : report.per_param_err) worst = std::max(worst, err);
  CHECK(report.max_rel_err == worst);
}

TEST_CASE("grad_check detects a planted corrupted gradient") {
  // A deliberately wrong op: forward x^2 elementwise, backward reports twice
  // the true gradient.
  Tensor x = Tensor::parameter({3}, {0.7, -1.2, 0.4});
  auto corrupted_square = [](const Tensor& in) {
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in.values()[i] * in.values()[i];
    auto node = detail::make_op("corrupted_square", in.shape(), std::move(out), {in.node_ptr()});
    detail::Node* xn = in.node();
    node->backprop = [xn](const std::vector<double>& adj, detail::AdjointMap& adjoints) {
      auto& dx = detail::adjoint_of(adjoints, xn);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += 2.0 * adj[i] * 2.0 * xn->values[i];
    };
    return wrap_node(std::move(node));
  };
  const auto report =
      grad_check("corrupted", [&] { return sum(corrupted_square(x)); }, {{"x", x}}, 1e-5);
  CHECK(report.max_rel_err == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("grad_check flags a non-deterministic function") {
  Tensor x = Tensor::parameter({1}, {1.0});
  int calls = 0;
  const auto report = grad_check(
      "flaky",
      [&] {
        ++calls;
        return scale(sum(x), 1.0 + 1e-12 * calls);
      },
      {{"x", x}}, 1e-5);
  CHECK_FALSE(report.deterministic);
}

TEST_CASE("randomized gradient sweep across the op set") {
  Rng rng(41);
  for (int point = 0; point < 10; ++point) {
    Tensor a = random_param({3, 3}, rng);
    Tensor b = random_param({3, 3}, rng);
    Tensor v = random_param({3}, rng);
    auto f = [&] {
      const Tensor m = matmul(a, transpose(b));
      const Tensor s = softmax(m, 1);
      const Tensor mixed = add(mul(s, b), scale(a, 0.25));
      const Tensor pooled = matvec(mixed, sigmoid(v));
      const Tensor parts = concat({pooled, relu(v)}, 0);
      return add(mean(parts), dot(v, v));
    };
    const auto report = grad_check("composite", f, {{"a", a}, {"b", b}, {"v", v}}, 1e-5);
    CHECK(report.max_rel_err < 1e-5);
  }
}

TEST_CASE("log_floor clamps and differentiates") {
  Tensor x = Tensor::parameter({3}, {0.5, 1e-15, 2.0});
  const Tensor y = log_floor(x, 1e-12);
  CHECK(y.values()[1] == std::log(1e-12));
  backward(sum(y));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == doctest::Approx(0.5));
}

TEST_CASE("tensor invariants: shape/product and finite construction") {
  CHECK_THROWS_AS(Tensor::constant({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::constant({1}, {std::nan("")}), DomainError);
  const Tensor s = Tensor::scalar(4.5);
  CHECK(s.rank() == 0);
  CHECK(s.size() == 1);
  CHECK(s.item() == 4.5);
}
