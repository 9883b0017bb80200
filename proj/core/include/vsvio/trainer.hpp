#pragma once

// Two-stage training: a warm-up with a random 50% visual policy that trains
// encoders and pose network on the pose loss only, then joint training of
// everything (policy included) on pose + efficiency loss with straight-through
// Gumbel-Softmax decisions and an exponentially decaying temperature.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vsvio/losses.hpp"
#include "vsvio/model.hpp"
#include "vsvio/random.hpp"
#include "vsvio/simkit.hpp"

namespace vsvio {

struct StageSchedule {
  int epochs = 0;
  double lr = 0.0;
  /// Batches per epoch; 0 = a full pass over all training windows.
  std::size_t max_batches = 0;
  /// Policy learning rate in joint stages; 0 = same as lr.
  double policy_lr = 0.0;

  double effective_policy_lr() const { return policy_lr > 0 ? policy_lr : lr; }
};

struct TrainSchedule {
  StageSchedule warmup{40, 5e-4};
  StageSchedule joint_a{40, 5e-5};
  StageSchedule joint_b{20, 1e-6};
  std::size_t batch_size = 16;
  /// Start offset between consecutive training windows, in frames.
  std::size_t window_stride = 10;
  double warmup_visual_prob = 0.5;
  double clip_norm = 5.0;
  double tau0 = 5.0;
  double tau_decay = 0.05;
  /// Gate used in the joint forward pass: false keeps hard decisions with
  /// the relaxed gradient, true feeds the relaxed sample (desk() sets it).
  bool relaxed_joint = false;

  /// The published schedule (full passes, original learning rates).
  static TrainSchedule paper();
  /// Same epoch counts and temperature schedule with capped epochs, sized
  /// for a single CPU core. The pose network barely moves in the joint
  /// stages while the policy learns at a much higher rate; see README.
  static TrainSchedule desk();
  void validate() const;
};

struct EpochLog {
  std::string stage;  // warmup | joint
  int epoch = 0;      // 0-based within the stage (joint epochs drive tau)
  double loss = 0.0;
  double pose_loss = 0.0;
  double efficiency_loss = 0.0;
  double usage = 0.0;
  double tau = 0.0;
  double lr = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Training windows: (sequence index, first sample) pairs of seq_len - 1
/// consecutive samples.
struct Window {
  std::size_t sequence = 0;
  std::size_t start = 0;
};
std::vector<Window> make_windows(std::span<const sim::Sequence> sequences, std::size_t steps,
                                 std::size_t stride);

/// Sets the model's input normalization from the training sequences.
void fit_model_norm(VioModel& model, std::span<const sim::Sequence> train);

/// Raises DivergenceError (with epoch and step) on a non-finite loss or
/// gradient. Policy parameters are never touched.
std::vector<EpochLog> warmup_train(VioModel& model, std::span<const sim::Sequence> train,
                                   const TrainSchedule& schedule, const LossConfig& loss,
                                   Rng& rng, const EpochCallback& on_epoch = {});

std::vector<EpochLog> joint_train(VioModel& model, std::span<const sim::Sequence> train,
                                  const TrainSchedule& schedule, const LossConfig& loss, Rng& rng,
                                  const EpochCallback& on_epoch = {});

/// One optimization step's forward + loss (exposed for gradient tests).
struct BatchLoss {
  Tensor total;
  Tensor pose;
  Tensor efficiency;
  double usage = 0.0;
};
BatchLoss batch_loss(const VioModel& model, std::span<const sim::Sequence> sequences,
                     std::span<const Window> windows, std::size_t steps, TrainGating gating,
                     double p_random, double tau, double lambda, double alpha, Rng& rng);

}  // namespace vsvio
