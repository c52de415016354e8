#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace multilogue {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {

struct Node;
using AdjointMap = std::unordered_map<Node*, std::vector<double>>;

// One recorded step of the computation history. `backprop` receives the
// adjoint of this node for the current backward pass and adds the resulting
// contributions into the adjoints of its parents. Persistent accumulation
// into Node::grad happens in backward(), not here.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass touches this node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const std::vector<double>& adjoint, AdjointMap& adjoints)> backprop;
};

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad);
std::shared_ptr<Node> make_op(const char* op, Shape shape, std::vector<double> values,
                              std::vector<std::shared_ptr<Node>> parents);
std::vector<double>& adjoint_of(AdjointMap& adjoints, Node* node);

}  // namespace detail

// Dense 64-bit tensor participating in a dynamically recorded computation
// history. Copying a Tensor copies the handle, not the storage; ops link the
// result to its inputs so that backward() can replay the history in reverse.
// A history and all tensors on it belong to a single thread; leaf value
// snapshots may be shared read-only across threads.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor constant(Shape shape, std::vector<double> values);
  // Grad-participating leaf (a trainable parameter or a checked input).
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t extent(std::size_t axis) const;

  const std::vector<double>& values() const;
  std::vector<double>& values_mut();  // leaf-only in practice (optimizer updates)
  double item() const;                // scalar tensors
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;  // ContractError when absent
  void zero_grad();

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor wrap_node(std::shared_ptr<detail::Node> node);
};

Tensor wrap_node(std::shared_ptr<detail::Node> node);

enum class EltKind { add, mul };
enum class Activation { tanh, sigmoid, relu };

// Core operation set. Every op validates shapes, computes the forward value
// eagerly, and records the backward rule.
Tensor matmul(const Tensor& a, const Tensor& b);   // [m,k] x [k,n] -> [m,n]
Tensor matvec(const Tensor& m, const Tensor& v);   // [m,k] x [k]   -> [m]
Tensor dot(const Tensor& a, const Tensor& b);      // [n] . [n]     -> scalar
Tensor transpose(const Tensor& m);                 // [m,n] -> [n,m]
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor elementwise(const Tensor& a, const Tensor& b, EltKind kind);
Tensor affine(const Tensor& x, double scale, double shift);  // scale*x + shift
Tensor scale(const Tensor& x, double factor);
Tensor add_all(const std::vector<Tensor>& terms);  // n-ary same-shape sum
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor activation(const Tensor& x, Activation kind);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor row(const Tensor& m, std::size_t index);    // [m,n] -> [n]
Tensor reshape(const Tensor& x, Shape shape);
Tensor stack_rows(const std::vector<Tensor>& rows);  // T x [n] -> [T,n]
Tensor sum(const Tensor& x);                         // -> scalar
Tensor mean(const Tensor& x);                        // -> scalar
Tensor log_floor(const Tensor& x, double floor = 1e-12);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

// Reverse-mode sweep from a scalar loss. Adjoints of this call are added
// into the grad accumulator of every grad-participating tensor reachable in
// the history; calling twice without zero_grad doubles the result.
void backward(const Tensor& loss);

}  // namespace multilogue
