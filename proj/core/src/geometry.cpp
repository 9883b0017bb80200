#include "vsvio/geometry.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "vsvio/errors.hpp"

namespace vsvio::geo {

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = translation + rotation * other.translation;
  return out;
}

Mat3 euler_to_rot(const Vec3& phi) {
  const double cr = std::cos(phi.x()), sr = std::sin(phi.x());
  const double cp = std::cos(phi.y()), sp = std::sin(phi.y());
  const double cy = std::cos(phi.z()), sy = std::sin(phi.z());
  Mat3 r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,  //
      sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,   //
      -sp, cp * sr, cp * cr;
  return r;
}

Vec3 rot_to_euler(const Mat3& r) {
  const double cp = std::hypot(r(0, 0), r(1, 0));
  const double pitch = std::atan2(-r(2, 0), cp);
  if (std::abs(std::abs(pitch) - std::numbers::pi / 2) <= kGimbalMargin) {
    throw DomainError("degenerate orientation: pitch within 1e-6 of +-pi/2");
  }
  const double roll = std::atan2(r(2, 1), r(2, 2));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  return {roll, pitch, yaw};
}

Pose to_pose(const RelPose& rel) { return {euler_to_rot(rel.phi), rel.v}; }

RelPose to_rel(const Pose& pose) { return {rot_to_euler(pose.rotation), pose.translation}; }

Pose compose(const Pose& p, const RelPose& t) { return p * to_pose(t); }

RelPose relative(const Pose& a, const Pose& b) { return to_rel(a.inverse() * b); }

Trajectory accumulate(const Pose& start, std::span<const RelPose> rels, double dt, double t0) {
  Trajectory traj;
  traj.poses.reserve(rels.size() + 1);
  traj.timestamps.reserve(rels.size() + 1);
  traj.poses.push_back(start);
  traj.timestamps.push_back(t0);
  for (std::size_t i = 0; i < rels.size(); ++i) {
    traj.poses.push_back(compose(traj.poses.back(), rels[i]));
    traj.timestamps.push_back(t0 + dt * static_cast<double>(i + 1));
  }
  return traj;
}

std::vector<RelPose> decompose(const Trajectory& traj) {
  std::vector<RelPose> rels;
  for (std::size_t i = 1; i < traj.poses.size(); ++i)
    rels.push_back(relative(traj.poses[i - 1], traj.poses[i]));
  return rels;
}

double rotation_angle(const Mat3& r) {
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

RmseResult rmse(std::span<const RelPose> pred, std::span<const RelPose> gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("rmse: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(gt.size()) + " ground-truth poses");
  }
  if (pred.empty()) return {};
  double st = 0.0, sr = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    st += (pred[i].v - gt[i].v).squaredNorm();
    sr += (pred[i].phi - gt[i].phi).squaredNorm();
  }
  const double n = 3.0 * static_cast<double>(pred.size());
  return {std::sqrt(st / n), std::sqrt(sr / n)};
}

std::vector<double> path_distances(const Trajectory& traj) {
  std::vector<double> dist(traj.poses.size(), 0.0);
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    dist[i] = dist[i - 1] + (traj.poses[i].translation - traj.poses[i - 1].translation).norm();
  }
  return dist;
}

std::optional<RelativeErrors> kitti_rel_errors(const Trajectory& pred, const Trajectory& gt) {
  if (pred.poses.size() != gt.poses.size()) {
    throw DimensionError("kitti_rel_errors: trajectories differ in length (" +
                         std::to_string(pred.poses.size()) + " vs " +
                         std::to_string(gt.poses.size()) + ")");
  }
  const std::vector<double> dist = path_distances(gt);
  RelativeErrors out;
  for (std::size_t first = 0; first < gt.poses.size(); first += kSegmentStride) {
    for (double len : kSegmentLengths) {
      const double target = dist[first] + len;
      const auto it = std::lower_bound(dist.begin() + static_cast<std::ptrdiff_t>(first),
                                       dist.end(), target);
      if (it == dist.end()) continue;
      const std::size_t last = static_cast<std::size_t>(it - dist.begin());
      const Pose gt_rel = gt.poses[first].inverse() * gt.poses[last];
      const Pose pred_rel = pred.poses[first].inverse() * pred.poses[last];
      const Pose err = gt_rel.inverse() * pred_rel;
      SegmentError seg;
      seg.start_frame = first;
      seg.length_m = len;
      seg.t_err_pct = err.translation.norm() / len * 100.0;
      seg.r_err_deg_per_100m = rotation_angle(err.rotation) * 180.0 / std::numbers::pi / len * 100.0;
      out.segments.push_back(seg);
    }
  }
  if (out.segments.empty()) return std::nullopt;
  for (const auto& s : out.segments) {
    out.t_rel += s.t_err_pct;
    out.r_rel += s.r_err_deg_per_100m;
  }
  out.t_rel /= static_cast<double>(out.segments.size());
  out.r_rel /= static_cast<double>(out.segments.size());
  return out;
}

}  // namespace vsvio::geo
