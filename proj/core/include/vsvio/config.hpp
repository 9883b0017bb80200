#pragma once

// Experiment configuration file: one JSON object with a version tag and
// sections mirroring SimConfig, ModelConfig, LossConfig and TrainSchedule,
// plus the seeds and the lambda ladder. Every key is optional and falls back
// to the struct default; unknown keys are rejected.
//
//   {
//     "version": 1,
//     "sim":      { ... SimConfig fields ... },
//     "model":    { ... ModelConfig fields ... },
//     "loss":     { "alpha": 100, "lambda": 0, "seq_len": 11 },
//     "schedule": { "warmup": {"epochs", "lr", "max_batches", "policy_lr"},
//                   "joint_a": {...}, "joint_b": {...}, "batch_size", ... },
//     "data_seed": 2024,
//     "seeds": [1, 2, 3, 4, 5],
//     "lambda_fractions": [...],
//     "lambda_presets": [1e-5, 3e-5, 5e-5, 7e-5],
//     "lambda_absolute": false,
//     "default_lambda_fraction": ...
//   }

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vsvio/losses.hpp"
#include "vsvio/model.hpp"
#include "vsvio/simkit.hpp"
#include "vsvio/trainer.hpp"

namespace vsvio {

inline constexpr int kConfigVersion = 1;

struct ExperimentConfig {
  int version = kConfigVersion;
  sim::SimConfig sim;
  ModelConfig model;
  LossConfig loss;
  TrainSchedule schedule = TrainSchedule::desk();

  std::uint64_t data_seed = 2024;
  /// Training/evaluation seeds; one independent run per seed.
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  /// Sweep ladder as multiples of L0, the final warm-up pose loss.
  std::vector<double> lambda_fractions = {0.3, 1.0, 3.0, 10.0};
  /// Absolute ladder for KITTI-scale losses, used when lambda_absolute.
  std::vector<double> lambda_presets = {1e-5, 3e-5, 5e-5, 7e-5};
  bool lambda_absolute = false;
  /// lambda / L0 of the model `train` produces without --lambda.
  double default_lambda_fraction = 3.0;

  /// ConfigError on invalid sections or a model that does not fit the data
  /// (visual_in != visual_dim, imu_len != IMU window).
  void validate() const;
  /// Absolute ladder for a warm-up loss L0.
  std::vector<double> ladder(double l0) const;
};

/// Canonical text: fixed key order, every field written.
std::string to_json(const ExperimentConfig& config);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// CRC-32 of the canonical text, as 8 hex digits.
std::string fingerprint(const ExperimentConfig& config);

}  // namespace vsvio
