#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vsvio/model.hpp"
#include "vsvio/simkit.hpp"

namespace vsvio {

struct SequenceTrace {
  std::size_t sequence = 0;  // index into the evaluated span
  std::vector<int> decisions;
  std::vector<double> p_visual;
  std::vector<double> speed;
  std::vector<double> yaw_rate;
  std::vector<geo::RelPose> pred;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double usage = 0.0;            // sum d / sum (T - 1)
  double gflops_per_step = 0.0;  // mean per frame interval
  double trans_rmse = 0.0;       // m, pooled over all steps
  double rot_rmse = 0.0;         // rad
  double t_rel = 0.0;            // %, pooled over all segments
  double r_rel = 0.0;            // deg / 100 m
  std::uint64_t flops = 0;
  std::size_t steps = 0;
  std::vector<SequenceTrace> traces;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample std (n - 1); 0 for a single seed
};

/// Two-pass mean and sample standard deviation.
Stat mean_std(std::span<const double> values);

struct RunReport {
  std::string label;
  std::string mode;
  double lambda = 0.0;
  std::string fingerprint;
  std::vector<SeedResult> seeds;
  Stat usage, gflops_per_step, trans_rmse, rot_rmse, t_rel, r_rel;

  /// Recomputes the aggregate rows from `seeds`.
  void aggregate();
};

/// Rolls out every sequence once per seed (hidden state carried across the
/// whole sequence) and scores the predictions. The rng for sequence i under
/// seed s is Rng(s).split(i).
RunReport evaluate(const VioModel& model, std::span<const sim::Sequence> sequences,
                   const PolicyMode& mode, std::span<const std::uint64_t> seeds, double frame_dt,
                   bool keep_traces = true);

/// Header plus one row per seed and "mean"/"std" rows per report.
void write_report_csv(std::ostream& out, std::span<const RunReport> reports);

/// Accumulated predicted trajectory for one trace.
geo::Trajectory predicted_trajectory(const sim::Sequence& seq, const SequenceTrace& trace,
                                     double frame_dt);

}  // namespace vsvio
