#pragma once

// Reverse-mode differentiable dense tensors.
//
// A Tensor is a cheap handle to a graph node holding a row-major array of
// doubles. Operations on tensors that require gradients record their parents
// and a backward closure; backward() walks the recorded graph once in reverse
// topological order, accumulates gradients into every reachable leaf and then
// frees the interior of the graph. Leaves (parameters, inputs) keep their
// gradient buffers until zero_grad().
//
// Broadcasting is limited to scalar-vs-tensor. Anything else goes through an
// explicit broadcast_to().

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vsvio {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable storage. Only meaningful on leaves; mutating an interior node
  /// after it was recorded invalidates its graph.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool is_leaf() const;
  void set_requires_grad(bool flag);

  /// Gradient accumulated by backward(); empty span if none was produced.
  std::span<const double> grad() const;
  /// Writable gradient buffer of a leaf (for clipping, scaling).
  std::span<double> mutable_grad();
  bool has_grad() const;
  void zero_grad();

  /// Same values, no history, no gradient tracking.
  Tensor detach() const;
  /// Deep copy as a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  /// Runs reverse-mode differentiation from this scalar root. The graph is
  /// consumed: a second call on the same root raises GraphError.
  void backward() const;

  /// Text dump of the recorded graph as "child -> parent" edges.
  std::string dump_graph() const;

  const detail::Node* node() const { return node_.get(); }

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---------------------------------------------------------------------------
// Operations. Every op validates shapes and raises DimensionError naming the
// offending shapes.

enum class UnaryKind { kTanh, kSigmoid, kRelu, kExp, kLog, kNeg };
enum class BinaryKind { kAdd, kSub, kMul, kDiv };
enum class ReduceKind { kSum, kMean };

Tensor unary(UnaryKind kind, const Tensor& x);
Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b);

inline Tensor tanh(const Tensor& x) { return unary(UnaryKind::kTanh, x); }
inline Tensor sigmoid(const Tensor& x) { return unary(UnaryKind::kSigmoid, x); }
/// ReLU; derivative at exactly 0 is 0.
inline Tensor relu(const Tensor& x) { return unary(UnaryKind::kRelu, x); }
inline Tensor exp(const Tensor& x) { return unary(UnaryKind::kExp, x); }
inline Tensor log(const Tensor& x) { return unary(UnaryKind::kLog, x); }

Tensor operator-(const Tensor& x);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double b);
Tensor operator-(const Tensor& a, double b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Fused x . W^T + b for x [batch x in], W [out x in], b [out] (optional).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());
/// 1-D cross-correlation (no kernel flip).
/// x [batch x in_ch x len], weight [out_ch x in_ch x k], bias [out_ch].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t padding);

/// Full reduction to a scalar (shape {}).
Tensor reduce(ReduceKind kind, const Tensor& x);
/// Reduction along one axis; the axis is removed from the shape.
Tensor reduce(ReduceKind kind, const Tensor& x, std::size_t axis);
inline Tensor sum(const Tensor& x) { return reduce(ReduceKind::kSum, x); }
inline Tensor mean(const Tensor& x) { return reduce(ReduceKind::kMean, x); }

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
/// Elements [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
/// Repeats size-1 axes up to `shape`; ranks must match.
Tensor broadcast_to(const Tensor& x, Shape shape);

Tensor softmax(const Tensor& x, std::size_t axis);
/// Max-shifted log-sum-exp form.
Tensor log_softmax(const Tensor& x, std::size_t axis);

/// Forward value `hard` (a constant of the same shape), gradient passed
/// unchanged to `relaxed`. Used for straight-through estimators.
Tensor straight_through(const Tensor& relaxed, std::span<const double> hard);

}  // namespace vsvio
