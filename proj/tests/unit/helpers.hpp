#pragma once

#include <cmath>
#include <vector>

#include "vsvio/random.hpp"
#include "vsvio/tensor.hpp"

namespace vt {

inline vsvio::Tensor randn(vsvio::Shape shape, vsvio::Rng& rng, bool grad = false, double scale = 1.0) {
  std::vector<double> v(vsvio::shape_numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return vsvio::Tensor::from(std::move(shape), std::move(v), grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

}  // namespace vt
