#pragma once

// SE(3) pose algebra and trajectory metrics.
//
// Euler convention: phi = (roll, pitch, yaw) with R = Rz(yaw) * Ry(pitch) *
// Rx(roll) (intrinsic Z-Y-X). Relative motion T between poses P_t and P_t+1
// satisfies P_t * T = P_t+1 and is stored as (phi, v) with v expressed in
// the frame of P_t.

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vsvio::geo {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  Pose inverse() const;
  Pose operator*(const Pose& other) const;
};

struct RelPose {
  Vec3 phi = Vec3::Zero();  // roll, pitch, yaw [rad]
  Vec3 v = Vec3::Zero();    // translation [m]
};

struct Trajectory {
  std::vector<Pose> poses;
  std::vector<double> timestamps;  // seconds, strictly increasing
};

inline constexpr double kGimbalMargin = 1e-6;

Mat3 euler_to_rot(const Vec3& phi);
/// Raises DomainError when |pitch| is within 1e-6 of pi/2.
Vec3 rot_to_euler(const Mat3& r);

Pose to_pose(const RelPose& rel);
RelPose to_rel(const Pose& pose);

/// P' = P * T: R' = R * R_T, t' = t + R * v_T.
Pose compose(const Pose& p, const RelPose& t);
/// Relative motion from a to b: a^-1 * b.
RelPose relative(const Pose& a, const Pose& b);

/// Left fold of compose starting at `start`; N-1 relative poses -> N poses.
/// Timestamps are spaced by `dt` from t0.
Trajectory accumulate(const Pose& start, std::span<const RelPose> rels, double dt = 0.1,
                      double t0 = 0.0);
/// Consecutive relative motions of a trajectory.
std::vector<RelPose> decompose(const Trajectory& traj);

/// Rotation angle of R in radians, in [0, pi].
double rotation_angle(const Mat3& r);
/// Nearest rotation in the Frobenius sense (SVD projection, det = +1).
Mat3 project_to_rotation(const Mat3& m);
/// max |R^T R - I|
double orthonormality_error(const Mat3& r);

struct RmseResult {
  double translation = 0.0;  // m
  double rotation = 0.0;     // rad
};

/// sqrt(sum ||v_hat - v||^2 / (3 (N-1))) and the same over phi.
RmseResult rmse(std::span<const RelPose> pred, std::span<const RelPose> gt);

struct SegmentError {
  std::size_t start_frame = 0;
  double length_m = 0.0;
  double t_err_pct = 0.0;
  double r_err_deg_per_100m = 0.0;
};

struct RelativeErrors {
  double t_rel = 0.0;  // %
  double r_rel = 0.0;  // deg / 100 m
  std::vector<SegmentError> segments;
};

inline constexpr double kSegmentLengths[] = {100, 200, 300, 400, 500, 600, 700, 800};
inline constexpr std::size_t kSegmentStride = 10;

/// Segment-based relative errors over 100..800 m, start frames every 10
/// frames. Returns nullopt when the ground truth has no complete segment.
std::optional<RelativeErrors> kitti_rel_errors(const Trajectory& pred, const Trajectory& gt);

/// Cumulative travelled distance per frame.
std::vector<double> path_distances(const Trajectory& traj);

// KITTI pose text: one line per pose, 12 decimal floats = row-major [R | t].

/// Parser rejects lines with the wrong field count, unparsable numbers, or
/// rotation blocks whose orthonormality error exceeds 1e-3; the message names
/// the 1-based line. Blocks off by more than 1e-7 are projected onto SO(3).
Trajectory parse_kitti_poses(const std::string& text, double dt = 0.1);
/// Nine significant digits per value.
std::string write_kitti_poses(const Trajectory& traj);

Trajectory read_kitti_file(const std::string& path, double dt = 0.1);
void write_kitti_file(const std::string& path, const Trajectory& traj);

/// CSV with columns start_frame,length_m,t_err_pct,r_err_deg_per_100m.
void write_segment_csv(std::ostream& out, std::span<const SegmentError> segments);

}  // namespace vsvio::geo
