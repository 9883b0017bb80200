#include "vsvio/losses.hpp"

#include "vsvio/errors.hpp"

namespace vsvio {

void LossConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("loss: alpha must be positive");
  if (!(lambda >= 0)) throw ConfigError("loss: lambda must be >= 0");
  if (seq_len < 2) throw ConfigError("loss: seq_len must be >= 2");
}

Tensor pose_loss(std::span<const Tensor> preds, std::span<const Tensor> gts, double alpha) {
  if (preds.size() != gts.size() || preds.empty()) {
    throw DimensionError("pose_loss: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(gts.size()) + " targets");
  }
  Tensor total;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    if (preds[t].shape() != gts[t].shape() || preds[t].rank() != 2 || preds[t].dim(1) != 6) {
      throw DimensionError("pose_loss: step " + std::to_string(t) + " shapes " +
                           shape_string(preds[t].shape()) + " vs " + shape_string(gts[t].shape()));
    }
    const Tensor diff = preds[t] - gts[t];
    const Tensor sq = diff * diff;
    const Tensor step = alpha * sum(slice(sq, 1, 0, 3)) + sum(slice(sq, 1, 3, 6));
    total = total.defined() ? total + step : step;
  }
  const double batch = static_cast<double>(preds[0].dim(0));
  return total / (3.0 * static_cast<double>(preds.size()) * batch);
}

double pose_loss(std::span<const geo::RelPose> pred, std::span<const geo::RelPose> gt, double alpha) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw DimensionError("pose_loss: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(gt.size()) + " targets");
  }
  double s = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    s += (pred[t].v - gt[t].v).squaredNorm() + alpha * (pred[t].phi - gt[t].phi).squaredNorm();
  }
  return s / (3.0 * static_cast<double>(pred.size()));
}

Tensor efficiency_loss(std::span<const Tensor> gates, double lambda) {
  if (gates.empty()) throw DimensionError("efficiency_loss: no decisions");
  Tensor total;
  for (const auto& g : gates) {
    const Tensor s = sum(g);
    total = total.defined() ? total + s : s;
  }
  const double batch = static_cast<double>(gates[0].dim(0));
  return total * (lambda / (static_cast<double>(gates.size()) * batch));
}

double efficiency_loss(std::span<const int> decisions, double lambda) {
  if (decisions.empty()) throw DimensionError("efficiency_loss: no decisions");
  double s = 0.0;
  for (int d : decisions) s += lambda * d;
  return s / static_cast<double>(decisions.size());
}

}  // namespace vsvio
