#include "vsvio/gumbel.hpp"

#include <algorithm>
#include <cmath>

#include "vsvio/errors.hpp"

namespace vsvio::gumbel {

double gumbel_from_uniform(double u) {
  u = std::clamp(u, kUniformClamp, 1.0 - kUniformClamp);
  return -std::log(-std::log(u));
}

std::vector<double> sample_gumbel(std::size_t k, Rng& rng) {
  std::vector<double> g(k);
  for (double& v : g) v = gumbel_from_uniform(rng.uniform());
  return g;
}

std::size_t gumbel_max(std::span<const double> log_p, std::span<const double> g) {
  if (log_p.size() != g.size() || log_p.empty()) {
    throw DimensionError("gumbel_max: " + std::to_string(log_p.size()) + " log-probabilities vs " +
                         std::to_string(g.size()) + " noise draws");
  }
  std::size_t best = 0;
  double best_score = log_p[0] + g[0];
  for (std::size_t k = 1; k < log_p.size(); ++k) {
    const double s = log_p[k] + g[k];
    if (s > best_score) {
      best = k;
      best_score = s;
    }
  }
  return best;
}

Tensor gumbel_softmax(const Tensor& log_p, std::span<const double> g, double tau) {
  if (!(tau > 0.0)) throw DomainError("gumbel_softmax: temperature must be positive");
  if (g.size() != log_p.numel()) {
    throw DimensionError("gumbel_softmax: noise length " + std::to_string(g.size()) +
                         " does not match " + shape_string(log_p.shape()));
  }
  const Tensor noise = Tensor::from(log_p.shape(), std::vector<double>(g.begin(), g.end()));
  return softmax((log_p + noise) * (1.0 / tau), log_p.rank() - 1);
}

DecisionSample straight_through_decision(const Tensor& log_p, double tau, Rng& rng) {
  if (log_p.rank() < 1) throw DimensionError("straight_through_decision needs a category axis");
  const std::size_t k = log_p.shape().back();
  const std::size_t rows = log_p.numel() / k;
  DecisionSample s;
  s.noise = sample_gumbel(log_p.numel(), rng);
  s.hard.assign(log_p.numel(), 0);
  std::vector<double> hard_values(log_p.numel(), 0.0);
  const auto lp = log_p.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t idx = gumbel_max(lp.subspan(r * k, k), std::span(s.noise).subspan(r * k, k));
    s.index.push_back(idx);
    s.hard[r * k + idx] = 1;
    hard_values[r * k + idx] = 1.0;
  }
  s.relaxed = gumbel_softmax(log_p, s.noise, tau);
  s.straight_through = vsvio::straight_through(s.relaxed, hard_values);
  return s;
}

double temperature(int epoch, double tau0, double decay) {
  return tau0 * std::exp(-decay * static_cast<double>(epoch));
}

}  // namespace vsvio::gumbel
