#pragma once

#include <functional>
#include <span>

#include "vsvio/tensor.hpp"

namespace vsvio {

/// Compares reverse-mode gradients against central finite differences.
/// Returns max_i |g_ad,i - g_fd,i| / max(1, |g_fd,i|); +inf if either
/// gradient contains a NaN. `f` must be deterministic.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-6);

/// Same check over every entry of every tensor in `params`, which are
/// perturbed in place and restored. `f` rebuilds its graph on each call.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double eps = 1e-6);

}  // namespace vsvio
