#pragma once

#include <span>

#include "vsvio/geometry.hpp"
#include "vsvio/tensor.hpp"

namespace vsvio {

struct LossConfig {
  double alpha = 100.0;  // rotation weight
  double lambda = 0.0;   // per-step visual usage penalty
  std::size_t seq_len = 11;  // frames per training subsequence (T)

  void validate() const;
};

/// Batch mean of 1/(3(T-1)) * sum_t (||v_hat - v||^2 + alpha ||phi_hat - phi||^2).
/// preds[t] and gts[t] are [batch x 6] laid out as (phi, v).
Tensor pose_loss(std::span<const Tensor> preds, std::span<const Tensor> gts, double alpha);
double pose_loss(std::span<const geo::RelPose> pred, std::span<const geo::RelPose> gt, double alpha);

/// Batch mean of lambda/(T-1) * sum_t d_t; gates[t] is [batch x 1].
Tensor efficiency_loss(std::span<const Tensor> gates, double lambda);
double efficiency_loss(std::span<const int> decisions, double lambda);

inline Tensor joint_loss(const Tensor& pose, const Tensor& efficiency) { return pose + efficiency; }
inline double joint_loss(double pose, double efficiency) { return pose + efficiency; }

}  // namespace vsvio
