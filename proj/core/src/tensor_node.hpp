#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vsvio/tensor.hpp"

namespace vsvio::detail {

// Storage aligned to Eigen's packet boundary. Eigen peels unaligned heads
// off vectorized loops, so with plain malloc alignment the summation order
// (and the last bit of results) would depend on where the heap put a buffer.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;
  bool requires_grad = false;
  bool leaf = true;
  bool released = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::span<double> grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace vsvio::detail

namespace vsvio {

struct TensorAccess {
  static Tensor wrap(std::shared_ptr<detail::Node> node) { return Tensor(std::move(node)); }
  static const std::shared_ptr<detail::Node>& node(const Tensor& t) { return t.node_; }
};

}  // namespace vsvio
