#include "vsvio/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace vsvio {

namespace {

double compare(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    if (std::isnan(a) || std::isnan(n)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(a - n) / std::max(1.0, std::abs(n)));
  }
  return worst;
}

double evaluate(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  return f().item();
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor leaf = x.clone(true);
  Tensor params[] = {leaf};
  return grad_check([&] { return f(leaf); }, params, eps);
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double eps) {
  for (Tensor& p : params) p.zero_grad();
  {
    Tensor root = f();
    if (root.requires_grad()) root.backward();
  }
  double worst = 0.0;
  for (Tensor& p : params) {
    std::vector<double> analytic(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    std::vector<double> numeric(p.numel());
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = evaluate(f);
      data[i] = saved - eps;
      const double down = evaluate(f);
      data[i] = saved;
      numeric[i] = (up - down) / (2.0 * eps);
    }
    worst = std::max(worst, compare(analytic, numeric));
    if (std::isinf(worst)) return worst;
  }
  return worst;
}

}  // namespace vsvio
