#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vsvio/random.hpp"
#include "vsvio/tensor.hpp"

namespace vsvio::gumbel {

inline constexpr double kUniformClamp = 1e-12;
inline constexpr double kInitialTemperature = 5.0;
inline constexpr double kTemperatureDecay = 0.05;

/// Standard Gumbel draws g_k = -log(-log U_k) with U_k clamped to
/// [1e-12, 1 - 1e-12].
std::vector<double> sample_gumbel(std::size_t k, Rng& rng);

/// Gumbel noise for a uniform draw (exposed for tests).
double gumbel_from_uniform(double u);

/// argmax_k(log_p[k] + g[k]); ties go to the lower index.
std::size_t gumbel_max(std::span<const double> log_p, std::span<const double> g);

/// softmax((log_p + g) / tau) along the last axis. log_p may be [K] or
/// [batch x K]; g has the same number of elements. Gradients flow to log_p.
Tensor gumbel_softmax(const Tensor& log_p, std::span<const double> g, double tau);

struct DecisionSample {
  std::vector<int> hard;        // one-hot, same layout as log_p
  Tensor relaxed;               // relaxed sample on the simplex
  Tensor straight_through;      // values == hard, gradient -> relaxed
  std::vector<double> noise;    // the g draws shared by hard and relaxed
  std::vector<std::size_t> index;  // chosen category per row
};

/// Hard Gumbel-Max sample for the forward pass and Gumbel-Softmax relaxation
/// (same noise) for the backward pass.
DecisionSample straight_through_decision(const Tensor& log_p, double tau, Rng& rng);

/// tau(epoch) = tau0 * exp(-decay * epoch)
double temperature(int epoch, double tau0 = kInitialTemperature, double decay = kTemperatureDecay);

}  // namespace vsvio::gumbel
