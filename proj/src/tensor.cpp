#include "multilogue/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "multilogue/errors.hpp"

namespace multilogue {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

namespace detail {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("tensor initialized with non-finite value");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

std::shared_ptr<Node> make_op(const char* op, Shape shape, std::vector<double> values,
                              std::vector<std::shared_ptr<Node>> parents) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  node->parents = std::move(parents);
  for (const auto& parent : node->parents) {
    if (parent->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  return node;
}

std::vector<double>& adjoint_of(AdjointMap& adjoints, Node* node) {
  auto& slot = adjoints[node];
  if (slot.empty()) slot.assign(node->values.size(), 0.0);
  return slot;
}

}  // namespace detail

using detail::AdjointMap;
using detail::Node;

namespace {

void check_finite(const Tensor& x, const char* op) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw DomainError(std::string(op) + ": non-finite input value");
  }
}

void require_defined(const Tensor& x, const char* op) {
  if (!x.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_to_string(x.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor wrap_node(std::shared_ptr<Node> node) { return Tensor{std::move(node)}; }

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> values(shape_size(shape), 0.0);
  return wrap_node(detail::make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> values(shape_size(shape), value);
  return wrap_node(detail::make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return wrap_node(detail::make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return wrap_node(detail::make_leaf(std::move(shape), std::move(values), true));
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("shape(): undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const { return shape_size(shape()); }

std::size_t Tensor::extent(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("extent(): axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(s));
  }
  return s[axis];
}

const std::vector<double>& Tensor::values() const {
  if (!node_) throw ContractError("values(): undefined tensor");
  return node_->values;
}

std::vector<double>& Tensor::values_mut() {
  if (!node_) throw ContractError("values_mut(): undefined tensor");
  return node_->values;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item(): tensor of shape " + shape_to_string(shape()) + " is not scalar");
  return values()[0];
}

double Tensor::at(std::size_t i) const {
  require_rank(*this, 1, "at");
  return values().at(i);
}

double Tensor::at(std::size_t i, std::size_t j) const {
  require_rank(*this, 2, "at");
  return values().at(i * shape()[1] + j);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw ContractError("grad(): no gradient accumulated on this tensor");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw DimensionError("matmul: inner extents differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  auto node = detail::make_op("matmul", {m, n}, std::move(out), {a.node_ptr(), b.node_ptr()});
  Node* an = a.node();
  Node* bn = b.node();
  node->backprop = [an, bn, m, k, n](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (an->requires_grad) {
      auto& da = detail::adjoint_of(adjoints, an);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += adj[i * n + j] * bn->values[p * n + j];
          da[i * k + p] += acc;
        }
    }
    if (bn->requires_grad) {
      auto& db = detail::adjoint_of(adjoints, bn);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += an->values[i * k + p] * adj[i * n + j];
          db[p * n + j] += acc;
        }
    }
  };
  return wrap_node(std::move(node));
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  require_defined(m, "matvec");
  require_defined(v, "matvec");
  require_rank(m, 2, "matvec");
  require_rank(v, 1, "matvec");
  const std::size_t rows = m.extent(0), cols = m.extent(1);
  if (cols != v.extent(0)) {
    throw DimensionError("matvec: " + shape_to_string(m.shape()) + " x " + shape_to_string(v.shape()));
  }
  std::vector<double> out(rows, 0.0);
  const auto& mv = m.values();
  const auto& vv = v.values();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += mv[i * cols + j] * vv[j];
    out[i] = acc;
  }
  auto node = detail::make_op("matvec", {rows}, std::move(out),
                              {m.node_ptr(), v.node_ptr()});
  Node* mn = m.node();
  Node* vn = v.node();
  node->backprop = [mn, vn, rows, cols](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (mn->requires_grad) {
      auto& dm = detail::adjoint_of(adjoints, mn);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) dm[i * cols + j] += adj[i] * vn->values[j];
    }
    if (vn->requires_grad) {
      auto& dv = detail::adjoint_of(adjoints, vn);
      for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += mn->values[i * cols + j] * adj[i];
        dv[j] += acc;
      }
    }
  };
  return wrap_node(std::move(node));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_defined(a, "dot");
  require_defined(b, "dot");
  require_rank(a, 1, "dot");
  require_rank(b, 1, "dot");
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.values()[i] * b.values()[i];
  auto node = detail::make_op("dot", {}, {acc},
                              {a.node_ptr(), b.node_ptr()});
  Node* an = a.node();
  Node* bn = b.node();
  node->backprop = [an, bn](const std::vector<double>& adj, AdjointMap& adjoints) {
    const double g = adj[0];
    if (an->requires_grad) {
      auto& da = detail::adjoint_of(adjoints, an);
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g * bn->values[i];
    }
    if (bn->requires_grad) {
      auto& db = detail::adjoint_of(adjoints, bn);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += g * an->values[i];
    }
  };
  return wrap_node(std::move(node));
}

Tensor transpose(const Tensor& m) {
  require_defined(m, "transpose");
  require_rank(m, 2, "transpose");
  const std::size_t rows = m.extent(0), cols = m.extent(1);
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = m.values()[i * cols + j];
  auto node = detail::make_op("transpose", {cols, rows}, std::move(out), {m.node_ptr()});
  Node* mn = m.node();
  node->backprop = [mn, rows, cols](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (!mn->requires_grad) return;
    auto& dm = detail::adjoint_of(adjoints, mn);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) dm[i * cols + j] += adj[j * rows + i];
  };
  return wrap_node(std::move(node));
}

namespace {

Tensor binary_pointwise(const char* name, const Tensor& a, const Tensor& b,
                        double (*fwd)(double, double), int kind) {
  require_defined(a, name);
  require_defined(b, name);
  require_same_shape(a, b, name);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.values()[i], b.values()[i]);
  auto node = detail::make_op(name, a.shape(), std::move(out),
                              {a.node_ptr(), b.node_ptr()});
  Node* an = a.node();
  Node* bn = b.node();
  node->backprop = [an, bn, kind](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (an->requires_grad) {
      auto& da = detail::adjoint_of(adjoints, an);
      for (std::size_t i = 0; i < da.size(); ++i) {
        da[i] += (kind == 2) ? adj[i] * bn->values[i] : adj[i];
      }
    }
    if (bn->requires_grad) {
      auto& db = detail::adjoint_of(adjoints, bn);
      for (std::size_t i = 0; i < db.size(); ++i) {
        if (kind == 2)
          db[i] += adj[i] * an->values[i];
        else if (kind == 1)
          db[i] -= adj[i];
        else
          db[i] += adj[i];
      }
    }
  };
  return wrap_node(std::move(node));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_pointwise("add", a, b, [](double x, double y) { return x + y; }, 0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_pointwise("sub", a, b, [](double x, double y) { return x - y; }, 1);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_pointwise("mul", a, b, [](double x, double y) { return x * y; }, 2);
}

Tensor elementwise(const Tensor& a, const Tensor& b, EltKind kind) {
  return kind == EltKind::add ? add(a, b) : mul(a, b);
}

Tensor affine(const Tensor& x, double scale_factor, double shift) {
  require_defined(x, "affine");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale_factor * x.values()[i] + shift;
  auto node = detail::make_op("affine", x.shape(), std::move(out), {x.node_ptr()});
  Node* xn = x.node();
  node->backprop = [xn, scale_factor](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (!xn->requires_grad) return;
    auto& dx = detail::adjoint_of(adjoints, xn);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += scale_factor * adj[i];
  };
  return wrap_node(std::move(node));
}

Tensor scale(const Tensor& x, double factor) { return affine(x, factor, 0.0); }

Tensor add_all(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw ContractError("add_all: empty term list");
  for (const Tensor& t : terms) {
    require_defined(t, "add_all");
    require_same_shape(terms.front(), t, "add_all");
  }
  std::vector<double> out(terms.front().size(), 0.0);
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(terms.size());
  for (const Tensor& t : terms) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += t.values()[i];
    parents.push_back(t.node_ptr());
  }
  auto node = detail::make_op("add_all", terms.front().shape(), std::move(out), std::move(parents));
  std::vector<Node*> raw;
  for (const auto& p : node->parents) raw.push_back(p.get());
  node->backprop = [raw](const std::vector<double>& adj, AdjointMap& adjoints) {
    for (Node* parent : raw) {
      if (!parent->requires_grad) continue;
      auto& dp = detail::adjoint_of(adjoints, parent);
      for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += adj[i];
    }
  };
  return wrap_node(std::move(node));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "softmax");
  check_finite(x, "softmax");
  const Shape& shape = x.shape();
  if (axis >= shape.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape));
  }
  if (shape[axis] == 0) throw DomainError("softmax: empty axis");
  if (shape.size() > 2) throw DimensionError("softmax: rank > 2 unsupported");

  const std::size_t lanes = shape[axis];
  // Rank 1: a single slice. Rank 2: one slice per row (axis 1) or column (axis 0).
  const std::size_t n_slices = shape.size() == 1 ? 1 : shape[1 - axis];
  const std::size_t stride = (shape.size() == 1 || axis == 1) ? 1 : shape[1];
  std::vector<std::size_t> bases(n_slices);
  for (std::size_t s = 0; s < n_slices; ++s) {
    bases[s] = shape.size() == 1 ? 0 : (axis == 1 ? s * shape[1] : s);
  }

  std::vector<double> out(x.size());
  const auto& xv = x.values();
  for (std::size_t s = 0; s < n_slices; ++s) {
    const std::size_t base = bases[s];
    double max_v = xv[base];
    for (std::size_t i = 1; i < lanes; ++i) max_v = std::max(max_v, xv[base + i * stride]);
    double total = 0.0;
    for (std::size_t i = 0; i < lanes; ++i) {
      const double e = std::exp(xv[base + i * stride] - max_v);
      out[base + i * stride] = e;
      total += e;
    }
    for (std::size_t i = 0; i < lanes; ++i) out[base + i * stride] /= total;
  }
  auto node = detail::make_op("softmax", shape, std::move(out), {x.node_ptr()});
  Node* xn = x.node();
  Node* self = node.get();
  node->backprop = [xn, self, lanes, stride, bases](const std::vector<double>& adj,
                                                    AdjointMap& adjoints) {
    if (!xn->requires_grad) return;
    auto& dx = detail::adjoint_of(adjoints, xn);
    const auto& y = self->values;
    for (const std::size_t base : bases) {
      double inner = 0.0;
      for (std::size_t i = 0; i < lanes; ++i) inner += adj[base + i * stride] * y[base + i * stride];
      for (std::size_t i = 0; i < lanes; ++i) {
        const std::size_t k = base + i * stride;
        dx[k] += y[k] * (adj[k] - inner);
      }
    }
  };
  return wrap_node(std::move(node));
}

Tensor activation(const Tensor& x, Activation kind) {
  require_defined(x, "activation");
  check_finite(x, "activation");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.values()[i];
    switch (kind) {
      case Activation::tanh: out[i] = std::tanh(v); break;
      case Activation::sigmoid: out[i] = 1.0 / (1.0 + std::exp(-v)); break;
      case Activation::relu: out[i] = v > 0.0 ? v : 0.0; break;
    }
  }
  const char* name = kind == Activation::tanh ? "tanh" : kind == Activation::sigmoid ? "sigmoid" : "relu";
  auto node = detail::make_op(name, x.shape(), std::move(out), {x.node_ptr()});
  Node* xn = x.node();
  Node* self = node.get();
  node->backprop = [xn, self, kind](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (!xn->requires_grad) return;
    auto& dx = detail::adjoint_of(adjoints, xn);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double y = self->values[i];
      double slope = 0.0;
      switch (kind) {
        case Activation::tanh: slope = 1.0 - y * y; break;
        case Activation::sigmoid: slope = y * (1.0 - y); break;
        case Activation::relu: slope = xn->values[i] > 0.0 ? 1.0 : 0.0; break;
      }
      dx[i] += slope * adj[i];
    }
  };
  return wrap_node(std::move(node));
}

Tensor tanh(const Tensor& x) { return activation(x, Activation::tanh); }
Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }
Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: empty part list");
  for (const Tensor& part : parts) require_defined(part, "concat");
  const std::size_t rank = parts.front().rank();
  if (rank == 0 || rank > 2) throw DimensionError("concat: rank must be 1 or 2");
  if (axis >= rank) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  for (const Tensor& part : parts) {
    if (part.rank() != rank) {
      throw DimensionError("concat: rank mismatch " + shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(part.shape()));
    }
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && part.shape()[d] != parts.front().shape()[d]) {
        throw DimensionError("concat: incompatible shapes " + shape_to_string(parts.front().shape()) +
                             " vs " + shape_to_string(part.shape()));
      }
    }
  }

  Shape out_shape = parts.front().shape();
  out_shape[axis] = 0;
  for (const Tensor& part : parts) out_shape[axis] += part.shape()[axis];

  std::vector<double> out(shape_size(out_shape));
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<std::size_t> offsets;  // running offset along `axis` per part
  std::size_t offset = 0;
  const std::size_t out_cols = rank == 2 ? out_shape[1] : 1;
  for (const Tensor& part : parts) {
    const auto& pv = part.values();
    if (rank == 1 || axis == 0) {
      // Contiguous block copy; rows stay intact.
      const std::size_t base = rank == 1 ? offset : offset * out_cols;
      std::copy(pv.begin(), pv.end(), out.begin() + static_cast<std::ptrdiff_t>(base));
    } else {
      const std::size_t rows = part.shape()[0], cols = part.shape()[1];
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[i * out_cols + offset + j] = pv[i * cols + j];
    }
    parents.push_back(part.node_ptr());
    offsets.push_back(offset);
    offset += part.shape()[axis];
  }

  auto node = detail::make_op("concat", out_shape, std::move(out), std::move(parents));
  std::vector<Node*> raw;
  for (const auto& p : node->parents) raw.push_back(p.get());
  node->backprop = [raw, offsets, axis, rank, out_cols](const std::vector<double>& adj,
                                                        AdjointMap& adjoints) {
    for (std::size_t pi = 0; pi < raw.size(); ++pi) {
      Node* parent = raw[pi];
      if (!parent->requires_grad) continue;
      auto& dp = detail::adjoint_of(adjoints, parent);
      if (rank == 1 || axis == 0) {
        const std::size_t base = rank == 1 ? offsets[pi] : offsets[pi] * out_cols;
        for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += adj[base + i];
      } else {
        const std::size_t rows = parent->shape[0], cols = parent->shape[1];
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) dp[i * cols + j] += adj[i * out_cols + offsets[pi] + j];
      }
    }
  };
  return wrap_node(std::move(node));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  require_defined(x, "slice");
  const std::size_t rank = x.rank();
  if (rank == 0 || rank > 2) throw DimensionError("slice: rank must be 1 or 2");
  if (axis >= rank) throw DimensionError("slice: axis out of range");
  if (start + length > x.shape()[axis]) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") exceeds extent " +
                         std::to_string(x.shape()[axis]));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(shape_size(out_shape));
  const std::size_t cols = rank == 2 ? x.shape()[1] : 1;
  if (rank == 1 || axis == 0) {
    const std::size_t base = rank == 1 ? start : start * cols;
    std::copy(x.values().begin() + static_cast<std::ptrdiff_t>(base),
              x.values().begin() + static_cast<std::ptrdiff_t>(base + out.size()), out.begin());
  } else {
    const std::size_t rows = x.shape()[0];
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < length; ++j) out[i * length + j] = x.values()[i * cols + start + j];
  }
  auto node = detail::make_op("slice", out_shape, std::move(out), {x.node_ptr()});
  Node* xn = x.node();
  node->backprop = [xn, axis, start, length, rank, cols](const std::vector<double>& adj,
                                                         AdjointMap& adjoints) {
    if (!xn->requires_grad) return;
    auto& dx = detail::adjoint_of(adjoints, xn);
    if (rank == 1 || axis == 0) {
      const std::size_t base = rank == 1 ? start : start * cols;
      for (std::size_t i = 0; i < adj.size(); ++i) dx[base + i] += adj[i];
    } else {
      const std::size_t rows = xn->shape[0];
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < length; ++j) dx[i * cols + start + j] += adj[i * length + j];
    }
  };
  return wrap_node(std::move(node));
}

Tensor row(const Tensor& m, std::size_t index) {
  require_rank(m, 2, "row");
  return reshape(slice(m, 0, index, 1), {m.extent(1)});
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_to_string(x.shape()) + " -> " + shape_to_string(shape) +
                         " changes element count");
  }
  auto node = detail::make_op("reshape", std::move(shape), x.values(), {x.node_ptr()});
  Node* xn = x.node();
  node->backprop = [xn](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (!xn->requires_grad) return;
    auto& dx = detail::adjoint_of(adjoints, xn);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += adj[i];
  };
  return wrap_node(std::move(node));
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: empty row list");
  std::vector<Tensor> reshaped;
  reshaped.reserve(rows.size());
  for (const Tensor& r : rows) {
    require_defined(r, "stack_rows");
    require_rank(r, 1, "stack_rows");
    reshaped.push_back(reshape(r, {1, r.extent(0)}));
  }
  return concat(reshaped, 0);
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  auto node = detail::make_op("sum", {}, {acc}, {x.node_ptr()});
  Node* xn = x.node();
  node->backprop = [xn](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (!xn->requires_grad) return;
    auto& dx = detail::adjoint_of(adjoints, xn);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += adj[0];
  };
  return wrap_node(std::move(node));
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  if (x.size() == 0) throw DomainError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor log_floor(const Tensor& x, double floor) {
  require_defined(x, "log_floor");
  if (floor <= 0.0) throw DomainError("log_floor: floor must be positive");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(x.values()[i], floor));
  auto node = detail::make_op("log_floor", x.shape(), std::move(out), {x.node_ptr()});
  Node* xn = x.node();
  node->backprop = [xn, floor](const std::vector<double>& adj, AdjointMap& adjoints) {
    if (!xn->requires_grad) return;
    auto& dx = detail::adjoint_of(adjoints, xn);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double v = xn->values[i];
      if (v > floor) dx[i] += adj[i] / v;
    }
  };
  return wrap_node(std::move(node));
}

// ---------------------------------------------------------------------------
// Reverse sweep

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.rank() != 0) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_to_string(loss.shape()));
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;  // nothing reachable participates

  // Topological order over the grad-participating subgraph, iterative DFS.
  std::vector<Node*> order;
  std::unordered_map<Node*, int> state;  // 0 unseen, 1 open, 2 done
  std::vector<Node*> stack{root};
  while (!stack.empty()) {
    Node* node = stack.back();
    int& s = state[node];
    if (s == 0) {
      s = 1;
      for (const auto& parent : node->parents) {
        if (parent->requires_grad && state[parent.get()] == 0) stack.push_back(parent.get());
      }
    } else {
      stack.pop_back();
      if (s == 1) {
        s = 2;
        order.push_back(node);
      }
    }
  }

  AdjointMap adjoints;
  adjoints[root] = {1.0};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto found = adjoints.find(node);
    if (found == adjoints.end()) continue;
    const std::vector<double>& adj = found->second;
    if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0);
    for (std::size_t i = 0; i < adj.size(); ++i) node->grad[i] += adj[i];
    if (node->backprop) node->backprop(adj, adjoints);
  }
}

}  // namespace multilogue
