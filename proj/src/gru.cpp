#include "multilogue/gru.hpp"

#include "multilogue/errors.hpp"

namespace multilogue {

GruCellParams GruCellParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  GruCellParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  auto mat = [&](std::size_t rows, std::size_t cols) {
    return Tensor::parameter({rows, cols}, std::vector<double>(rows * cols, 0.0));
  };
  p.W_z = mat(hidden_dim, input_dim);
  p.W_r = mat(hidden_dim, input_dim);
  p.W_h = mat(hidden_dim, input_dim);
  p.U_z = mat(hidden_dim, hidden_dim);
  p.U_r = mat(hidden_dim, hidden_dim);
  p.U_h = mat(hidden_dim, hidden_dim);
  p.b_z = Tensor::parameter({hidden_dim}, std::vector<double>(hidden_dim, 0.0));
  p.b_r = Tensor::parameter({hidden_dim}, std::vector<double>(hidden_dim, 0.0));
  p.b_h = Tensor::parameter({hidden_dim}, std::vector<double>(hidden_dim, 0.0));
  return p;
}

void GruCellParams::validate() const {
  auto expect = [&](const Tensor& t, Shape shape, const char* name) {
    if (!t.defined() || t.shape() != shape) {
      throw DimensionError(std::string("gru cell: block ") + name + " must have shape " +
                           shape_to_string(shape) +
                           (t.defined() ? ", got " + shape_to_string(t.shape()) : ", got undefined"));
    }
  };
  expect(W_z, {hidden_dim, input_dim}, "W_z");
  expect(W_r, {hidden_dim, input_dim}, "W_r");
  expect(W_h, {hidden_dim, input_dim}, "W_h");
  expect(U_z, {hidden_dim, hidden_dim}, "U_z");
  expect(U_r, {hidden_dim, hidden_dim}, "U_r");
  expect(U_h, {hidden_dim, hidden_dim}, "U_h");
  expect(b_z, {hidden_dim}, "b_z");
  expect(b_r, {hidden_dim}, "b_r");
  expect(b_h, {hidden_dim}, "b_h");
}

std::vector<std::pair<std::string, Tensor>> GruCellParams::named_blocks(const std::string& prefix) const {
  return {{prefix + ".W_z", W_z}, {prefix + ".W_r", W_r}, {prefix + ".W_h", W_h},
          {prefix + ".U_z", U_z}, {prefix + ".U_r", U_r}, {prefix + ".U_h", U_h},
          {prefix + ".b_z", b_z}, {prefix + ".b_r", b_r}, {prefix + ".b_h", b_h}};
}

Tensor gru_cell(const GruCellParams& params, const Tensor& h_prev, const Tensor& x) {
  params.validate();
  if (h_prev.rank() != 1 || h_prev.extent(0) != params.hidden_dim) {
    throw DimensionError("gru_cell: h_prev shape " + shape_to_string(h_prev.shape()) +
                         " does not match hidden_dim " + std::to_string(params.hidden_dim));
  }
  if (x.rank() != 1 || x.extent(0) != params.input_dim) {
    throw DimensionError("gru_cell: input shape " + shape_to_string(x.shape()) +
                         " does not match input_dim " + std::to_string(params.input_dim));
  }
  const Tensor z = sigmoid(add(add(matvec(params.W_z, x), matvec(params.U_z, h_prev)), params.b_z));
  const Tensor r = sigmoid(add(add(matvec(params.W_r, x), matvec(params.U_r, h_prev)), params.b_r));
  const Tensor candidate =
      tanh(add(add(matvec(params.W_h, x), matvec(params.U_h, mul(r, h_prev))), params.b_h));
  return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, candidate));
}

}  // namespace multilogue
