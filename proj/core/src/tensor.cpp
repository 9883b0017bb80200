#include "vsvio/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "tensor_node.hpp"
#include "vsvio/errors.hpp"

namespace vsvio {

using detail::Buffer;
using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

namespace {

thread_local bool g_grad_enabled = true;

const NodePtr& node_of(const Tensor& t) {
  const auto& n = TensorAccess::node(t);
  if (!n) throw Error("operation on an undefined tensor");
  return n;
}

NodePtr make_leaf(Shape shape, Buffer value, bool requires_grad) {
  if (shape_numel(shape) != value.size()) {
    throw DimensionError("data length " + std::to_string(value.size()) +
                         " does not match shape " + shape_string(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

// Creates the output node of an op; history is recorded only when gradient
// mode is on and some input needs a gradient.
Tensor record(Shape shape, Buffer value, const char* op,
              std::initializer_list<const Tensor*> inputs,
              std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  n->leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor* in : inputs) needs = needs || (in->defined() && in->requires_grad());
  }
  if (needs) {
    n->requires_grad = true;
    for (const Tensor* in : inputs) n->parents.push_back(in->defined() ? node_of(*in) : nullptr);
    n->backward = std::move(backward);
  }
  return TensorAccess::wrap(std::move(n));
}

Tensor record_many(Shape shape, Buffer value, const char* op,
                   std::span<const Tensor> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  n->leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    for (const Tensor& in : inputs) n->parents.push_back(node_of(in));
    n->backward = std::move(backward);
  }
  return TensorAccess::wrap(std::move(n));
}

bool wants_grad(const NodePtr& p) { return p && p->requires_grad; }

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(t.shape()));
  }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() = default;
Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), Buffer(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), Buffer(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), Buffer(data.begin(), data.end()), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return node_of(*this)->shape; }
std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range for " + shape_string(s));
  return s[axis];
}
std::size_t Tensor::numel() const { return node_of(*this)->value.size(); }
std::span<const double> Tensor::data() const { return node_of(*this)->value; }
std::span<double> Tensor::mutable_data() { return node_of(*this)->value; }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on non-scalar " + shape_string(shape()));
  return data()[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  require_rank(*this, 2, "at");
  return data()[row * shape()[1] + col];
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }
bool Tensor::is_leaf() const { return node_of(*this)->leaf; }

void Tensor::set_requires_grad(bool flag) {
  auto& n = node_of(*this);
  if (!n->leaf) throw GraphError("set_requires_grad on a non-leaf tensor");
  n->requires_grad = flag;
}

std::span<const double> Tensor::grad() const { return node_of(*this)->grad; }
std::span<double> Tensor::mutable_grad() { return node_of(*this)->grad; }
bool Tensor::has_grad() const { return !node_of(*this)->grad.empty(); }
void Tensor::zero_grad() {
  auto& g = node_of(*this)->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = node_of(*this);
  return Tensor(make_leaf(n->shape, n->value, false));
}

Tensor Tensor::clone(bool requires_grad) const {
  const auto& n = node_of(*this);
  return Tensor(make_leaf(n->shape, n->value, requires_grad));
}

void Tensor::backward() const {
  const auto& root = node_of(*this);
  if (root->value.size() != 1) {
    throw GraphError("backward requires a scalar root, got shape " + shape_string(root->shape));
  }
  if (root->released) throw GraphError("backward through a freed graph");
  if (!root->requires_grad) throw GraphError("backward on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        if (p->released) throw GraphError("backward through a freed graph");
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (Node* n : order) {
    if (n->leaf) continue;
    n->parents.clear();
    n->backward = nullptr;
    n->grad.clear();
    n->grad.shrink_to_fit();
    n->released = true;
  }
}

std::string Tensor::dump_graph() const {
  std::ostringstream out;
  std::map<const Node*, std::size_t> ids;
  std::vector<const Node*> queue{node_of(*this).get()};
  ids[queue.front()] = 0;
  auto label = [&](const Node* n) {
    return "n" + std::to_string(ids.at(n)) + "[" + n->op + " " + shape_string(n->shape) + "]";
  };
  for (std::size_t i = 0; i < queue.size(); ++i) {
    const Node* n = queue[i];
    if (n->parents.empty()) out << label(n) << "\n";
    for (const auto& p : n->parents) {
      if (!p) continue;
      if (!ids.count(p.get())) {
        ids[p.get()] = ids.size();
        queue.push_back(p.get());
      }
      out << label(n) << " -> " << label(p.get()) << "\n";
    }
  }
  return out.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Elementwise

Tensor unary(UnaryKind kind, const Tensor& x) {
  const auto& xv = node_of(x)->value;
  Buffer y(xv.size());
  const char* name = "";
  switch (kind) {
    case UnaryKind::kTanh:
      name = "tanh";
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(xv[i]);
      break;
    case UnaryKind::kSigmoid:
      name = "sigmoid";
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = xv[i];
        if (v >= 0) {
          y[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
          const double e = std::exp(v);
          y[i] = e / (1.0 + e);
        }
      }
      break;
    case UnaryKind::kRelu:
      name = "relu";
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > 0 ? xv[i] : 0.0;
      break;
    case UnaryKind::kExp:
      name = "exp";
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(xv[i]);
      break;
    case UnaryKind::kLog:
      name = "log";
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(xv[i] > 0)) {
          throw DomainError("log of non-positive entry " + std::to_string(xv[i]) + " at index " +
                            std::to_string(i));
        }
        y[i] = std::log(xv[i]);
      }
      break;
    case UnaryKind::kNeg:
      name = "neg";
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = -xv[i];
      break;
  }
  return record(x.shape(), std::move(y), name, {&x}, [kind](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto g = in.grad_buffer();
    const auto& gy = self.grad;
    const auto& xv = in.value;
    const auto& yv = self.value;
    for (std::size_t i = 0; i < gy.size(); ++i) {
      double d = 0.0;
      switch (kind) {
        case UnaryKind::kTanh: d = 1.0 - yv[i] * yv[i]; break;
        case UnaryKind::kSigmoid: d = yv[i] * (1.0 - yv[i]); break;
        case UnaryKind::kRelu: d = xv[i] > 0 ? 1.0 : 0.0; break;
        case UnaryKind::kExp: d = yv[i]; break;
        case UnaryKind::kLog: d = 1.0 / xv[i]; break;
        case UnaryKind::kNeg: d = -1.0; break;
      }
      g[i] += gy[i] * d;
    }
  });
}

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const auto& av = node_of(a)->value;
  const auto& bv = node_of(b)->value;
  const bool same = a.shape() == b.shape();
  const bool a_scalar = !same && av.size() == 1;
  const bool b_scalar = !same && !a_scalar && bv.size() == 1;
  if (!same && !a_scalar && !b_scalar) {
    throw DimensionError("binary op shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Shape out_shape = a_scalar ? b.shape() : a.shape();
  if (a_scalar && b_scalar) out_shape = a.rank() >= b.rank() ? a.shape() : b.shape();
  const std::size_t n = std::max(av.size(), bv.size());
  const std::size_t as = a_scalar ? 0 : 1;
  const std::size_t bs = b_scalar ? 0 : 1;

  Buffer y(n);
  const char* name = "";
  switch (kind) {
    case BinaryKind::kAdd:
      name = "add";
      for (std::size_t i = 0; i < n; ++i) y[i] = av[i * as] + bv[i * bs];
      break;
    case BinaryKind::kSub:
      name = "sub";
      for (std::size_t i = 0; i < n; ++i) y[i] = av[i * as] - bv[i * bs];
      break;
    case BinaryKind::kMul:
      name = "mul";
      for (std::size_t i = 0; i < n; ++i) y[i] = av[i * as] * bv[i * bs];
      break;
    case BinaryKind::kDiv:
      name = "div";
      for (std::size_t i = 0; i < n; ++i) {
        if (bv[i * bs] == 0.0) {
          throw DomainError("division by zero at index " + std::to_string(i * bs));
        }
        y[i] = av[i * as] / bv[i * bs];
      }
      break;
  }
  return record(std::move(out_shape), std::move(y), name, {&a, &b},
                [kind, as, bs, n](Node& self) {
                  Node* pa = self.parents[0].get();
                  Node* pb = self.parents[1].get();
                  const auto& gy = self.grad;
                  const auto& av = pa->value;
                  const auto& bv = pb->value;
                  if (pa->requires_grad) {
                    auto ga = pa->grad_buffer();
                    for (std::size_t i = 0; i < n; ++i) {
                      double d = 1.0;
                      if (kind == BinaryKind::kMul) d = bv[i * bs];
                      if (kind == BinaryKind::kDiv) d = 1.0 / bv[i * bs];
                      ga[i * as] += gy[i] * d;
                    }
                  }
                  if (pb->requires_grad) {
                    auto gb = pb->grad_buffer();
                    for (std::size_t i = 0; i < n; ++i) {
                      double d = 1.0;
                      if (kind == BinaryKind::kSub) d = -1.0;
                      if (kind == BinaryKind::kMul) d = av[i * as];
                      if (kind == BinaryKind::kDiv) {
                        const double bb = bv[i * bs];
                        d = -av[i * as] / (bb * bb);
                      }
                      gb[i * bs] += gy[i] * d;
                    }
                  }
                });
}

Tensor operator-(const Tensor& x) { return unary(UnaryKind::kNeg, x); }
Tensor operator+(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kAdd, a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kSub, a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kMul, a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kDiv, a, b); }
Tensor operator+(const Tensor& a, double b) { return a + Tensor::scalar(b); }
Tensor operator-(const Tensor& a, double b) { return a - Tensor::scalar(b); }
Tensor operator*(const Tensor& a, double b) { return a * Tensor::scalar(b); }
Tensor operator*(double a, const Tensor& b) { return Tensor::scalar(a) * b; }
Tensor operator/(const Tensor& a, double b) { return a / Tensor::scalar(b); }

// ---------------------------------------------------------------------------
// Dense products

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Buffer y(m * n);
  MatMap(y.data(), m, n).noalias() =
      ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, n);
  return record({m, n}, std::move(y), "matmul", {&a, &b}, [m, k, n](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    ConstMatMap gy(self.grad.data(), m, n);
    if (pa->requires_grad) {
      MatMap(pa->grad_buffer().data(), m, k).noalias() +=
          gy * ConstMatMap(pb->value.data(), k, n).transpose();
    }
    if (pb->requires_grad) {
      MatMap(pb->grad_buffer().data(), k, n).noalias() +=
          ConstMatMap(pa->value.data(), m, k).transpose() * gy;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{out}) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  Buffer y(batch * out);
  MatMap ym(y.data(), batch, out);
  ym.noalias() = ConstMatMap(x.data().data(), batch, in) *
                 ConstMatMap(weight.data().data(), out, in).transpose();
  if (has_bias) {
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), out);
  }
  return record({batch, out}, std::move(y), "linear", {&x, &weight, &bias},
                [batch, in, out, has_bias](Node& self) {
                  Node* px = self.parents[0].get();
                  Node* pw = self.parents[1].get();
                  ConstMatMap gy(self.grad.data(), batch, out);
                  if (px->requires_grad) {
                    MatMap(px->grad_buffer().data(), batch, in).noalias() +=
                        gy * ConstMatMap(pw->value.data(), out, in);
                  }
                  if (pw->requires_grad) {
                    MatMap(pw->grad_buffer().data(), out, in).noalias() +=
                        gy.transpose() * ConstMatMap(px->value.data(), batch, in);
                  }
                  if (has_bias) {
                    Node* pb = self.parents[2].get();
                    if (pb->requires_grad) {
                      Eigen::Map<Eigen::RowVectorXd>(pb->grad_buffer().data(), out) +=
                          gy.colwise().sum();
                    }
                  }
                });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(x, 3, "conv1d");
  require_rank(weight, 3, "conv1d");
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw DimensionError("conv1d: input " + shape_string(x.shape()) + " does not match kernels " +
                         shape_string(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw DimensionError("conv1d: bias " + shape_string(bias.shape()) +
                         " does not match kernels " + shape_string(weight.shape()));
  }
  if (stride == 0) throw DimensionError("conv1d: stride must be positive");
  if (len + 2 * padding < k) {
    throw DimensionError("conv1d: input length " + std::to_string(len) + " with padding " +
                         std::to_string(padding) + " is shorter than kernel " + std::to_string(k));
  }
  const std::size_t lout = (len + 2 * padding - k) / stride + 1;
  const auto& xv = x.data();
  const auto& wv = weight.data();
  Buffer y(batch * cout * lout, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* yrow = &y[(b * cout + o) * lout];
      const double bo = bias.defined() ? bias.data()[o] : 0.0;
      for (std::size_t l = 0; l < lout; ++l) yrow[l] = bo;
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = &xv[(b * cin + c) * len];
        const double* w = &wv[(o * cin + c) * k];
        for (std::size_t l = 0; l < lout; ++l) {
          double acc = 0.0;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(l * stride + j) -
                                       static_cast<std::ptrdiff_t>(padding);
            if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) acc += w[j] * xrow[pos];
          }
          yrow[l] += acc;
        }
      }
    }
  }
  return record({batch, cout, lout}, std::move(y), "conv1d", {&x, &weight, &bias},
                [=](Node& self) {
                  Node* px = self.parents[0].get();
                  Node* pw = self.parents[1].get();
                  Node* pb = self.parents[2].get();
                  const auto& gy = self.grad;
                  const auto& xv = px->value;
                  const auto& wv = pw->value;
                  double* gx = px->requires_grad ? px->grad_buffer().data() : nullptr;
                  double* gw = pw->requires_grad ? pw->grad_buffer().data() : nullptr;
                  double* gb = wants_grad(self.parents[2]) ? pb->grad_buffer().data() : nullptr;
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t o = 0; o < cout; ++o) {
                      const double* grow = &gy[(b * cout + o) * lout];
                      if (gb) {
                        for (std::size_t l = 0; l < lout; ++l) gb[o] += grow[l];
                      }
                      for (std::size_t c = 0; c < cin; ++c) {
                        const std::size_t xoff = (b * cin + c) * len;
                        const std::size_t woff = (o * cin + c) * k;
                        for (std::size_t l = 0; l < lout; ++l) {
                          for (std::size_t j = 0; j < k; ++j) {
                            const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(l * stride + j) -
                                                       static_cast<std::ptrdiff_t>(padding);
                            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(len)) continue;
                            if (gw) gw[woff + j] += grow[l] * xv[xoff + pos];
                            if (gx) gx[xoff + pos] += grow[l] * wv[woff + j];
                          }
                        }
                      }
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Reductions and shape ops

Tensor reduce(ReduceKind kind, const Tensor& x) {
  const auto& xv = x.data();
  double s = 0.0;
  for (double v : xv) s += v;
  const double scale = kind == ReduceKind::kMean ? 1.0 / static_cast<double>(xv.size()) : 1.0;
  return record({}, {s * scale}, kind == ReduceKind::kMean ? "mean" : "sum", {&x},
                [scale](Node& self) {
                  Node& in = *self.parents[0];
                  if (!in.requires_grad) return;
                  const double g = self.grad[0] * scale;
                  for (double& gi : in.grad_buffer()) gi += g;
                });
}

Tensor reduce(ReduceKind kind, const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "reduce");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const double scale = kind == ReduceKind::kMean ? 1.0 / static_cast<double>(s.extent) : 1.0;
  const auto& xv = x.data();
  Buffer y(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t a = 0; a < s.extent; ++a)
      for (std::size_t i = 0; i < s.inner; ++i)
        y[o * s.inner + i] += xv[(o * s.extent + a) * s.inner + i];
  for (double& v : y) v *= scale;
  return record(std::move(out_shape), std::move(y), kind == ReduceKind::kMean ? "mean" : "sum",
                {&x}, [s, scale](Node& self) {
                  Node& in = *self.parents[0];
                  if (!in.requires_grad) return;
                  auto g = in.grad_buffer();
                  for (std::size_t o = 0; o < s.outer; ++o)
                    for (std::size_t a = 0; a < s.extent; ++a)
                      for (std::size_t i = 0; i < s.inner; ++i)
                        g[(o * s.extent + a) * s.inner + i] += self.grad[o * s.inner + i] * scale;
                });
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  const Tensor parts[] = {a, b};
  return concat(std::span<const Tensor>(parts), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& ref = parts.front().shape();
  split_axis(ref, axis, "concat");
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == ref[i];
    if (!ok) {
      throw DimensionError("concat shape mismatch on non-concat axes: " + shape_string(ref) +
                           " vs " + shape_string(s));
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  const AxisSplit os = split_axis(out_shape, axis, "concat");
  Buffer y(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].data();
    const std::size_t e = extents[p];
    for (std::size_t o = 0; o < os.outer; ++o)
      std::copy_n(&v[o * e * os.inner], e * os.inner,
                  &y[(o * os.extent + offset) * os.inner]);
    offset += e;
  }
  return record_many(std::move(out_shape), std::move(y), "concat", parts,
                     [os, extents](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         Node& in = *self.parents[p];
                         const std::size_t e = extents[p];
                         if (in.requires_grad) {
                           auto g = in.grad_buffer();
                           for (std::size_t o = 0; o < os.outer; ++o)
                             for (std::size_t i = 0; i < e * os.inner; ++i)
                               g[o * e * os.inner + i] +=
                                   self.grad[(o * os.extent + offset) * os.inner + i];
                         }
                         offset += e;
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (begin > end || end > s.extent) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for axis " + std::to_string(axis) + " of " +
                         shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  const std::size_t e = end - begin;
  out_shape[axis] = e;
  const auto& xv = x.data();
  Buffer y(s.outer * e * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(&xv[(o * s.extent + begin) * s.inner], e * s.inner, &y[o * e * s.inner]);
  return record(std::move(out_shape), std::move(y), "slice", {&x}, [s, begin, e](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto g = in.grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < e * s.inner; ++i)
        g[(o * s.extent + begin) * s.inner + i] += self.grad[o * e * s.inner + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  Buffer y(x.data().begin(), x.data().end());
  return record(std::move(shape), std::move(y), "reshape", {&x}, [](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor broadcast_to(const Tensor& x, Shape shape) {
  const Shape& in_shape = x.shape();
  bool ok = in_shape.size() == shape.size();
  for (std::size_t i = 0; ok && i < shape.size(); ++i)
    ok = in_shape[i] == shape[i] || in_shape[i] == 1;
  if (!ok) {
    throw DimensionError("cannot broadcast " + shape_string(in_shape) + " to " +
                         shape_string(shape));
  }
  const std::size_t rank = shape.size();
  // Input strides with zero on broadcast axes.
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t acc = 1;
  for (std::size_t i = rank; i-- > 0;) {
    in_stride[i] = in_shape[i] == 1 ? 0 : acc;
    acc *= in_shape[i];
  }
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < rank; ++i) off += idx[i] * in_stride[i];
    src[flat] = off;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  const auto& xv = x.data();
  Buffer y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = xv[src[i]];
  return record(std::move(shape), std::move(y), "broadcast", {&x},
                [src = std::move(src)](Node& self) {
                  Node& in = *self.parents[0];
                  if (!in.requires_grad) return;
                  auto g = in.grad_buffer();
                  for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
                });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto& xv = x.data();
  Buffer y(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < s.extent; ++a) m = std::max(m, xv[base + a * s.inner]);
      double z = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const double e = std::exp(xv[base + a * s.inner] - m);
        y[base + a * s.inner] = e;
        z += e;
      }
      for (std::size_t a = 0; a < s.extent; ++a) y[base + a * s.inner] /= z;
    }
  }
  return record(x.shape(), std::move(y), "softmax", {&x}, [s](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto g = in.grad_buffer();
    const auto& yv = self.value;
    const auto& gy = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t a = 0; a < s.extent; ++a)
          dot += gy[base + a * s.inner] * yv[base + a * s.inner];
        for (std::size_t a = 0; a < s.extent; ++a) {
          const std::size_t j = base + a * s.inner;
          g[j] += yv[j] * (gy[j] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "log_softmax");
  const auto& xv = x.data();
  Buffer y(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < s.extent; ++a) m = std::max(m, xv[base + a * s.inner]);
      double z = 0.0;
      for (std::size_t a = 0; a < s.extent; ++a) z += std::exp(xv[base + a * s.inner] - m);
      const double lse = m + std::log(z);
      for (std::size_t a = 0; a < s.extent; ++a)
        y[base + a * s.inner] = xv[base + a * s.inner] - lse;
    }
  }
  return record(x.shape(), std::move(y), "log_softmax", {&x}, [s](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto g = in.grad_buffer();
    const auto& yv = self.value;
    const auto& gy = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double total = 0.0;
        for (std::size_t a = 0; a < s.extent; ++a) total += gy[base + a * s.inner];
        for (std::size_t a = 0; a < s.extent; ++a) {
          const std::size_t j = base + a * s.inner;
          g[j] += gy[j] - std::exp(yv[j]) * total;
        }
      }
    }
  });
}

Tensor straight_through(const Tensor& relaxed, std::span<const double> hard) {
  if (hard.size() != relaxed.numel()) {
    throw DimensionError("straight_through: hard values (" + std::to_string(hard.size()) +
                         ") do not match " + shape_string(relaxed.shape()));
  }
  Buffer y(hard.begin(), hard.end());
  return record(relaxed.shape(), std::move(y), "straight_through", {&relaxed}, [](Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace vsvio
