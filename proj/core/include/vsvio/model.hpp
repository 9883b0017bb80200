#pragma once

// Gated visual-inertial odometry network.
//
// Per frame interval t:
//   x_i = inertial encoder(IMU window)          always
//   p_t = softmax(policy(h_{t-1} (+) x_i))      learned mode, t >= 2
//   x_v = visual encoder(visual proxy)          only when d_t = 1
//   z_t = [x_v or 0 ; x_i]
//   (h_t, phi_t, v_t) = 2-layer LSTM + MLP head(z_t)
// d_1 = 1 in every mode. p_t[0] is the probability of using the visual
// encoder. The policy reads the top-layer LSTM hidden state.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vsvio/geometry.hpp"
#include "vsvio/nn.hpp"
#include "vsvio/random.hpp"
#include "vsvio/tensor.hpp"

namespace vsvio {

inline constexpr std::size_t kImuChannels = 6;
inline constexpr std::size_t kPoseDim = 6;  // (phi, v)

struct ModelConfig {
  std::size_t visual_in = 64;
  std::vector<std::size_t> visual_hidden = {256, 256};
  std::size_t visual_feat = 64;
  std::size_t imu_len = 11;
  std::vector<std::size_t> inertial_channels = {8, 8, 8};
  std::vector<std::size_t> inertial_strides = {2, 2, 1};
  std::size_t inertial_kernel = 3;
  std::size_t inertial_feat = 32;
  std::size_t hidden = 64;
  std::vector<std::size_t> policy_hidden = {32, 32};
  std::size_t head_hidden = 64;

  /// Raises ConfigError on zero sizes or mismatched conv lists.
  void validate() const;
  std::size_t fused_dim() const { return visual_feat + inertial_feat; }
};

/// Fixed affine normalization applied to raw inputs before the encoders.
struct InputNorm {
  std::array<double, kImuChannels> imu_mean{};
  std::array<double, kImuChannels> imu_scale{1, 1, 1, 1, 1, 1};
  double visual_scale = 1.0;
  /// Head outputs are multiplied by these to give (phi, v).
  std::array<double, kPoseDim> pose_scale{1, 1, 1, 1, 1, 1};
};

/// One frame interval of raw input.
struct StepInput {
  std::span<const double> visual;  // visual_in
  std::span<const double> imu;     // 6 x imu_len, row-major
};

struct VisualEncoder {
  std::vector<nn::Linear> layers;  // ReLU between layers, linear readout
  Tensor forward(const Tensor& x) const;
  std::uint64_t flops() const;
};

struct InertialEncoder {
  std::vector<nn::Conv1d> convs;  // ReLU after every conv
  nn::Linear fc;                  // flatten -> feature, linear readout
  std::size_t imu_len = 11;
  Tensor forward(const Tensor& imu) const;
  std::uint64_t flops() const;
};

struct PolicyNet {
  std::vector<nn::Linear> layers;  // three layers, ReLU between
  /// [batch x (H + Fi)] -> logits [batch x 2]
  Tensor logits(const Tensor& h_prev, const Tensor& x_i) const;
  std::uint64_t flops() const;
};

struct RnnState {
  nn::LstmState l1;
  nn::LstmState l2;
};

struct PoseStep {
  RnnState state;
  Tensor pose;  // [batch x 6] = (phi, v)
};

struct PoseRnn {
  nn::LstmCell lstm1;
  nn::LstmCell lstm2;
  nn::Linear head1;  // ReLU
  nn::Linear head2;
  Tensor pose_scale;  // [1 x 6] constant
  PoseStep step(const Tensor& z, const RnnState& prev) const;
  RnnState zero_state(std::size_t batch) const;
  std::uint64_t flops() const;
};

struct FlopTable {
  std::uint64_t visual = 0;
  std::uint64_t inertial = 0;
  std::uint64_t policy = 0;
  std::uint64_t rnn_head = 0;

  /// Cost of one always-executed step without the policy.
  std::uint64_t fixed() const { return inertial + rnn_head; }
};

/// fixed + usage * visual
double gated_flops(double fixed, double visual, double usage);

class VioModel {
 public:
  explicit VioModel(ModelConfig config = {});

  const ModelConfig& config() const { return config_; }
  const InputNorm& norm() const { return norm_; }
  void set_norm(const InputNorm& n);

  /// Weight init per layer kind; parameters start at zero otherwise.
  void init(Rng& rng);

  nn::ParamList parameters() const;
  nn::ParamList policy_parameters() const;
  /// Encoders and pose network: everything trained in warm-up.
  nn::ParamList pose_parameters() const;

  /// imu [batch x 6 x imu_len] -> [batch x inertial_feat]
  Tensor encode_inertial(const Tensor& imu) const;
  /// visual [batch x visual_in] -> [batch x visual_feat]
  Tensor encode_visual(const Tensor& visual) const;
  Tensor policy_logits(const Tensor& h_prev, const Tensor& x_i) const;
  /// [x_v ; x_i] when d = 1, [0 ; x_i] when d = 0. Batch size 1 or any
  /// batch with a single shared decision.
  Tensor fuse(const std::optional<Tensor>& x_v, const Tensor& x_i, bool d) const;
  PoseStep rnn_pose_step(const Tensor& z, const RnnState& prev) const;
  RnnState zero_state(std::size_t batch) const { return rnn_.zero_state(batch); }

  /// Normalized input tensors for a batch of steps.
  Tensor make_visual(std::span<const StepInput> steps) const;
  Tensor make_imu(std::span<const StepInput> steps) const;

  FlopTable count_flops() const;

  const VisualEncoder& visual_encoder() const { return visual_; }
  const InertialEncoder& inertial_encoder() const { return inertial_; }
  const PolicyNet& policy() const { return policy_; }
  const PoseRnn& rnn() const { return rnn_; }

 private:
  ModelConfig config_;
  InputNorm norm_;
  VisualEncoder visual_;
  InertialEncoder inertial_;
  PolicyNet policy_;
  PoseRnn rnn_;
};

/// learned | bernoulli:<p> | regular:<n> | always
struct PolicyMode {
  enum class Kind { kLearned, kBernoulli, kRegular, kAlways };
  Kind kind = Kind::kLearned;
  double p = 0.5;
  int n = 1;

  static PolicyMode learned() { return {Kind::kLearned, 0.0, 1}; }
  static PolicyMode bernoulli(double p);
  static PolicyMode regular(int n);
  static PolicyMode always() { return {Kind::kAlways, 1.0, 1}; }
  /// Raises ConfigError on unknown kinds or out-of-range values.
  static PolicyMode parse(const std::string& text);
  std::string to_string() const;
};

struct RolloutResult {
  std::vector<int> decisions;           // d_t
  std::vector<double> p_visual;         // p_t[0]; 1 at the forced first step
  std::vector<geo::RelPose> poses;      // (phi_t, v_t)
  std::vector<std::vector<double>> hidden;  // top-layer h_t (if requested)
  double usage = 0.0;
  std::uint64_t flops = 0;
};

struct RolloutOptions {
  bool keep_hidden = false;
};

/// Inference over one sequence with batch size 1 and no gradient recording.
/// Learned mode samples d_t ~ Bernoulli(p_t[0]). regular(n) enables the
/// visual encoder when (t - 1) mod n == 0 (1-based t).
RolloutResult rollout(const VioModel& model, std::span<const StepInput> steps,
                      const PolicyMode& mode, Rng& rng, const RolloutOptions& options = {});

/// FLOPs a rollout must report for the given decisions.
std::uint64_t predicted_rollout_flops(const FlopTable& table, std::span<const int> decisions,
                                      const PolicyMode& mode);

// ---------------------------------------------------------------------------
// Batched training forward pass.

struct TrainStep {
  Tensor visual;  // [batch x visual_in], normalized
  Tensor imu;     // [batch x 6 x imu_len], normalized
};

enum class TrainGating {
  kRandom,   // hard Bernoulli(p) decisions, policy unused
  kLearned,  // straight-through Gumbel-Softmax on the policy
  kRelaxed,  // soft Gumbel-Softmax gate in the forward pass too
};

struct TrainForward {
  std::vector<Tensor> poses;     // per step [batch x 6]
  std::vector<Tensor> gates;     // per step [batch x 1], forward value = d_t
  std::vector<std::vector<int>> decisions;  // per step, per batch row
};

TrainForward train_forward(const VioModel& model, std::span<const TrainStep> steps,
                           TrainGating gating, double p_random, double tau, Rng& rng);

}  // namespace vsvio
