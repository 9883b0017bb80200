#pragma once

// Synthetic planar driving data with IMU windows and a visual-proxy channel.
//
// The vehicle moves in the x-y plane (z = 0, roll = pitch = 0) with body x
// forward and z up; gravity is -9.81 along world z. Speed u(t) and path
// curvature kappa(t) are smoothstep-interpolated inside each motion segment,
// yaw rate is u * kappa. Dense states are integrated at the IMU rate with the
// midpoint rule:
//   yaw_{k+1} = yaw_k + h * omega(t_k + h/2)
//   p_{k+1}   = p_k + h * u(t_k + h/2) * (cos, sin)((yaw_k + yaw_{k+1}) / 2)
// IMU samples are taken at the dense ticks. Consecutive frame windows share
// their endpoint sample.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vsvio/geometry.hpp"
#include "vsvio/model.hpp"
#include "vsvio/random.hpp"

namespace vsvio::sim {

inline constexpr int kDatasetVersion = 1;

struct MotionSegment {
  double duration = 1.0;       // s
  double end_speed = 0.0;      // m/s
  double end_curvature = 0.0;  // 1/m, positive turns left
};

struct SimConfig {
  double frame_rate = 10.0;  // Hz
  double imu_rate = 100.0;   // Hz
  std::size_t frames_per_sequence = 400;
  std::size_t num_sequences = 20;
  double train_fraction = 0.7;

  // Motion. When `schedule` is non-empty it is used verbatim for every
  // sequence; otherwise segments are drawn at random.
  double initial_speed = 6.0;
  double min_speed = 0.0;
  double max_speed = 15.5;
  double max_accel = 2.5;      // m/s^2, bound on |du/dt|
  double max_yaw_rate = 0.68;  // rad/s, bound on |u * kappa|
  double min_segment = 3.0;    // s
  double max_segment = 8.0;    // s
  double turn_probability = 0.4;
  double stop_probability = 0.08;
  std::vector<MotionSegment> schedule;

  // Sensors.
  double gravity = 9.81;
  double gyro_noise = 1e-3;     // rad/s
  double accel_noise = 1e-2;    // m/s^2
  double gyro_bias = 1e-3;      // per-axis bias drawn from U(-b, b)
  double accel_bias = 1e-2;
  double vibration_noise = 0.3;  // extra white accel noise per m/s of speed
  // Road-induced pitch wobble leaking gravity into the forward axis: a
  // zero-mean AR(1) disturbance with sd = pitch_disturbance * speed and the
  // given correlation time. Slow enough to look like real acceleration.
  double pitch_disturbance = 0.0;  // m/s^2 per m/s
  double pitch_correlation = 1.0;   // s
  std::size_t visual_dim = 64;
  double visual_snr = 80.0;  // mean ||E * gt_rel|| / sigma_v; 0 = noiseless

  std::size_t imu_per_frame() const;  // l; windows hold l + 1 samples
  std::size_t window_len() const { return imu_per_frame() + 1; }
  double frame_dt() const { return 1.0 / frame_rate; }
  /// Raises ConfigError on inconsistent values.
  void validate() const;
  /// All noise sources and biases off.
  SimConfig noiseless() const;
};

struct DenseStates {
  double dt = 0.01;
  std::vector<double> t, x, y, yaw;
  std::vector<double> speed, accel, yaw_rate;  // u, du/dt, omega at the ticks
  geo::Pose pose(std::size_t k) const;
  std::size_t size() const { return t.size(); }
};

struct Sample {
  std::vector<double> visual;  // visual_dim
  std::vector<double> imu;     // 6 x (l+1), rows gyro xyz then accel xyz
  geo::RelPose gt_rel;
  double gt_speed = 0.0;     // mean over the interval, m/s
  double gt_yaw_rate = 0.0;  // |delta yaw| / dt, rad/s
};

struct Sequence {
  std::uint64_t seed = 0;
  geo::Pose initial;
  std::array<double, 3> gyro_bias{};
  std::array<double, 3> accel_bias{};
  double visual_sigma = 0.0;
  std::vector<Sample> samples;

  std::vector<StepInput> inputs() const;
  std::vector<geo::RelPose> gt_rels() const;
  geo::Trajectory gt_trajectory(double dt) const;
};

struct Dataset {
  SimConfig config;
  std::uint64_t seed = 0;
  std::vector<double> embedding;  // visual_dim x 6, row-major
  std::vector<Sequence> sequences;

  /// First round(train_fraction * n) sequences (at least one each side when
  /// n >= 2).
  std::size_t train_count() const;
  std::span<const Sequence> train() const;
  std::span<const Sequence> test() const;
};

/// Random segment list covering at least `duration` seconds.
std::vector<MotionSegment> random_schedule(const SimConfig& config, double duration, Rng& rng);
/// ConfigError if speed leaves [0, max_speed], |du/dt| > max_accel or
/// |u * kappa| > max_yaw_rate anywhere along the schedule.
void validate_schedule(const SimConfig& config, std::span<const MotionSegment> schedule);

DenseStates generate_trajectory(const SimConfig& config, std::span<const MotionSegment> schedule,
                                std::size_t ticks);
/// Uses config.schedule or a random schedule from `rng`.
DenseStates generate_trajectory(const SimConfig& config, Rng& rng);

/// Frame poses at every l-th tick.
std::vector<geo::Pose> frame_poses(const DenseStates& states, std::size_t l);

/// One 6 x (l+1) window per frame interval.
std::vector<std::vector<double>> synthesize_imu(const DenseStates& states, const SimConfig& config,
                                                const std::array<double, 3>& gyro_bias,
                                                const std::array<double, 3>& accel_bias, Rng& rng);

/// Embedding entries ~ N(0, 1/visual_dim).
std::vector<double> make_embedding(std::size_t visual_dim, Rng& rng);
/// E * [phi; v] + N(0, sigma^2) per interval; returns sigma used.
double synthesize_visual(std::span<Sample> samples, std::span<const double> embedding,
                         std::size_t visual_dim, double snr, Rng& rng);

Sequence generate_sequence(const SimConfig& config, std::span<const double> embedding,
                           std::uint64_t seed);
/// Pure function of (config, seed).
Dataset generate_dataset(const SimConfig& config, std::uint64_t seed);

/// Directory with manifest.json and one seq_NNNN.bin per sequence
/// (little-endian float64, CRC-32 in the manifest).
void export_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Per-channel mean and inverse std over the training windows, and a
/// visual scale giving unit RMS.
InputNorm fit_input_norm(std::span<const Sequence> sequences);

}  // namespace vsvio::sim
