#pragma once

// Experiment pipeline shared by the CLI and the acceptance suite: dataset,
// per-seed warm-up, joint training over the lambda ladder, and the
// matched-usage baseline comparison.
//
// Every random stream hangs off the run seed s:
//   Rng(s).split(0)  model init
//   Rng(s).split(1)  warm-up batches and gates
//   Rng(s).split(2)  joint batches and Gumbel noise (same for every lambda)
//   Rng(s)           evaluation (see evaluate())

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vsvio/config.hpp"
#include "vsvio/evaluate.hpp"
#include "vsvio/model.hpp"
#include "vsvio/simkit.hpp"
#include "vsvio/trainer.hpp"

namespace vsvio::experiment {

/// Usage tolerance (absolute) for a baseline to count as matched.
inline constexpr double kMatchTolerance = 0.03;

using Progress = std::function<void(const std::string&)>;

sim::Dataset make_dataset(const ExperimentConfig& config);

/// Initialized model with input normalization fitted on `train`.
VioModel fresh_model(const ExperimentConfig& config, std::span<const sim::Sequence> train,
                     std::uint64_t seed);

struct Warm {
  VioModel model;
  std::vector<EpochLog> logs;
  double l0 = 0.0;  // mean pose loss of the last five warm-up epochs
};

Warm warmup(const ExperimentConfig& config, std::span<const sim::Sequence> train,
            std::uint64_t seed, const EpochCallback& on_epoch = {});

std::vector<EpochLog> joint(VioModel& model, const ExperimentConfig& config,
                            std::span<const sim::Sequence> train, std::uint64_t seed,
                            double lambda, const EpochCallback& on_epoch = {});

/// What a checkpoint was trained for.
struct ModelInfo {
  std::string stage;  // warmup | joint
  std::uint64_t seed = 0;
  double l0 = 0.0;
  double lambda = 0.0;
};

/// Parameter checkpoint whose "extra" manifest object holds the experiment
/// config, the input normalization, the FLOP table and `info`.
void save_model(const std::filesystem::path& base, const VioModel& model,
                const ExperimentConfig& config, const ModelInfo& info);

struct LoadedModel {
  VioModel model;
  ExperimentConfig config;
  ModelInfo info;
};
LoadedModel load_model(const std::filesystem::path& base);

/// Flat copy of every parameter value, and its inverse.
std::vector<double> snapshot(const VioModel& model);
void restore(VioModel& model, std::span<const double> values);

/// Bernoulli probability whose expected usage, counting the forced first
/// frame of every sequence, equals `usage`.
double matched_bernoulli_p(double usage, std::span<const sim::Sequence> sequences);
/// Exact usage of regular(n) and the n closest to `usage`.
double regular_usage(int n, std::span<const sim::Sequence> sequences);
int matched_regular_n(double usage, std::span<const sim::Sequence> sequences);

struct Comparison {
  RunReport learned;
  RunReport bernoulli;
  RunReport regular;
  bool bernoulli_matched = false;
  bool regular_matched = false;

  /// Learned t_rel below both baselines and both baselines matched.
  bool learned_wins() const;
};

/// Single-seed comparison of a learned model against its usage-matched
/// baselines on `sequences`.
Comparison compare_baselines(const VioModel& model, std::span<const sim::Sequence> sequences,
                             std::uint64_t seed, double frame_dt, const std::string& fingerprint);

struct SeedSweep {
  std::uint64_t seed = 0;
  double l0 = 0.0;
  std::vector<double> lambdas;
  std::vector<RunReport> reports;              // learned mode, one per lambda
  std::vector<std::vector<double>> params;     // trained parameters per lambda
};

struct Sweep {
  std::vector<SeedSweep> seeds;
  double seconds = 0.0;

  /// Mean over seeds of the report field for ladder rung k.
  double mean_usage(std::size_t rung) const;
  double mean_trans_rmse(std::size_t rung) const;
  /// Reports of rung k pooled over seeds, aggregated.
  RunReport pooled(std::size_t rung) const;
};

/// Warm-up once per seed, then joint training from the warm parameters for
/// every lambda of the ladder; each trained model is evaluated in learned
/// mode on the test split with the run seed.
Sweep sweep(const ExperimentConfig& config, const sim::Dataset& data,
            const Progress& progress = {}, bool keep_params = false);

}  // namespace vsvio::experiment
