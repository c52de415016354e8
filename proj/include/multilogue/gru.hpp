#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "multilogue/tensor.hpp"

namespace multilogue {

// Parameters of one gated recurrent cell. Gate convention used throughout:
//   z = sigmoid(W_z x + U_z h + b_z)
//   r = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + U_h (r .* h) + b_h)
//   h' = (1 - z) .* h + z .* h~
// so an all-zero cell halves its hidden state (z = 1/2, h~ = 0).
struct GruCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor W_z, W_r, W_h;  // hidden_dim x input_dim
  Tensor U_z, U_r, U_h;  // hidden_dim x hidden_dim
  Tensor b_z, b_r, b_h;  // hidden_dim

  static GruCellParams zeros(std::size_t input_dim, std::size_t hidden_dim);

  void validate() const;  // throws DimensionError unless all nine blocks match

  // Canonical block order: W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h.
  std::vector<std::pair<std::string, Tensor>> named_blocks(const std::string& prefix) const;
};

Tensor gru_cell(const GruCellParams& params, const Tensor& h_prev, const Tensor& x);

}  // namespace multilogue
