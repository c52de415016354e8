#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "multilogue/errors.hpp"
#include "multilogue/grad_check.hpp"
#include "multilogue/gru.hpp"
#include "multilogue/rng.hpp"

using namespace multilogue;

namespace {

GruCellParams random_cell(std::size_t input_dim, std::size_t hidden_dim, Rng& rng, double span = 0.8) {
  GruCellParams p = GruCellParams::zeros(input_dim, hidden_dim);
  for (auto& [name, block] : p.named_blocks("cell")) {
    Tensor t = block;
    for (double& v : t.values_mut()) v = rng.uniform(-span, span);
  }
  return p;
}

}  // namespace

TEST_CASE("zero-parameter cell halves its hidden state") {
  const GruCellParams p = GruCellParams::zeros(2, 3);
  const Tensor h = Tensor::constant({3}, {0.4, -1.0, 2.0});
  const Tensor x = Tensor::constant({2}, {5.0, -7.0});
  const Tensor next = gru_cell(p, h, x);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(next.values()[i] == doctest::Approx(0.5 * h.values()[i]).epsilon(1e-15));
  }

  const Tensor h0 = Tensor::zeros({3});
  CHECK(gru_cell(p, h0, x).values() == std::vector<double>{0, 0, 0});
}

TEST_CASE("gru_cell output bounded by convex combination of h_prev and tanh") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const GruCellParams p = random_cell(3, 4, rng, 2.0);
    std::vector<double> hv(4), xv(3);
    for (double& v : hv) v = rng.uniform(-3.0, 3.0);
    for (double& v : xv) v = rng.uniform(-3.0, 3.0);
    const Tensor next = gru_cell(p, Tensor::constant({4}, hv), Tensor::constant({3}, xv));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(next.values()[i]) <= std::max(std::abs(hv[i]), 1.0) + 1e-12);
    }
  }
}

TEST_CASE("gru_cell gradients vs finite differences on all nine blocks") {
  Rng rng(9);
  const GruCellParams p = random_cell(2, 3, rng);
  Tensor h = Tensor::parameter({3}, {0.3, -0.6, 0.1});
  Tensor x = Tensor::parameter({2}, {0.9, -0.2});
  const Tensor weight = Tensor::constant({3}, {1.0, -2.0, 0.5});

  std::vector<std::pair<std::string, Tensor>> checked = p.named_blocks("gru");
  checked.emplace_back("h_prev", h);
  checked.emplace_back("x", x);

  const auto report = grad_check(
      "gru_cell", [&] { return dot(gru_cell(p, h, x), weight); }, checked, 1e-5);
  CHECK(report.max_rel_err < 1e-5);
  CHECK(report.per_param_err.size() == 11);
  for (const auto& [name, err] : report.per_param_err) {
    INFO(name);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("gru_cell unrolled over several steps still checks out") {
  Rng rng(15);
  const GruCellParams p = random_cell(2, 3, rng);
  std::vector<Tensor> inputs;
  for (int t = 0; t < 4; ++t) {
    inputs.push_back(Tensor::constant({2}, {rng.uniform(-1, 1), rng.uniform(-1, 1)}));
  }
  auto f = [&] {
    Tensor h = Tensor::zeros({3});
    for (const Tensor& x : inputs) h = gru_cell(p, h, x);
    return sum(h);
  };
  const auto report = grad_check("gru_unrolled", f, p.named_blocks("gru"), 1e-5);
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("gru_cell validates shapes") {
  const GruCellParams p = GruCellParams::zeros(2, 3);
  CHECK_THROWS_AS(gru_cell(p, Tensor::zeros({4}), Tensor::zeros({2})), DimensionError);
  CHECK_THROWS_AS(gru_cell(p, Tensor::zeros({3}), Tensor::zeros({5})), DimensionError);

  GruCellParams broken = GruCellParams::zeros(2, 3);
  broken.U_h = Tensor::zeros({2, 2});
  CHECK_THROWS_WITH_AS(gru_cell(broken, Tensor::zeros({3}), Tensor::zeros({2})),
                       doctest::Contains("U_h"), DimensionError);
}
