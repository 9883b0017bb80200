#include "vsvio/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "vsvio/errors.hpp"
#include "vsvio/gumbel.hpp"

namespace vsvio {

TrainSchedule TrainSchedule::paper() { return {}; }

TrainSchedule TrainSchedule::desk() {
  TrainSchedule s;
  s.warmup = {40, 5e-4, 0};
  s.window_stride = 5;
  s.joint_a = {40, 1e-6, 36, 1e-3};
  s.joint_b = {20, 1e-7, 36, 1e-4};
  // hard decisions with a relaxed gradient drive the policy toward skipping
  // where vision helps most; the soft gate keeps the slope honest (README)
  s.relaxed_joint = true;
  return s;
}

void TrainSchedule::validate() const {
  for (const auto* st : {&warmup, &joint_a, &joint_b}) {
    if (st->epochs < 0) throw ConfigError("schedule: epochs must be >= 0");
    if (!(st->lr > 0) || st->policy_lr < 0) {
      throw ConfigError("schedule: learning rates must be positive");
    }
  }
  if (batch_size == 0) throw ConfigError("schedule: batch_size must be positive");
  if (window_stride == 0) throw ConfigError("schedule: window_stride must be positive");
  if (!(warmup_visual_prob >= 0 && warmup_visual_prob <= 1)) {
    throw ConfigError("schedule: warmup_visual_prob must be in [0, 1]");
  }
  if (!(clip_norm > 0)) throw ConfigError("schedule: clip_norm must be positive");
  if (!(tau0 > 0) || tau_decay < 0) throw ConfigError("schedule: need tau0 > 0, tau_decay >= 0");
}

std::vector<Window> make_windows(std::span<const sim::Sequence> sequences, std::size_t steps,
                                 std::size_t stride) {
  std::vector<Window> out;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const std::size_t n = sequences[s].samples.size();
    for (std::size_t b = 0; b + steps <= n; b += stride) out.push_back({s, b});
  }
  return out;
}

void fit_model_norm(VioModel& model, std::span<const sim::Sequence> train) {
  model.set_norm(sim::fit_input_norm(train));
}

BatchLoss batch_loss(const VioModel& model, std::span<const sim::Sequence> sequences,
                     std::span<const Window> windows, std::size_t steps, TrainGating gating,
                     double p_random, double tau, double lambda, double alpha, Rng& rng) {
  std::vector<TrainStep> inputs(steps);
  std::vector<Tensor> gts(steps);
  std::vector<StepInput> row(windows.size());
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> gt(windows.size() * 6);
    for (std::size_t b = 0; b < windows.size(); ++b) {
      const sim::Sample& s = sequences[windows[b].sequence].samples[windows[b].start + t];
      row[b] = {s.visual, s.imu};
      for (int k = 0; k < 3; ++k) {
        gt[b * 6 + k] = s.gt_rel.phi[k];
        gt[b * 6 + 3 + k] = s.gt_rel.v[k];
      }
    }
    inputs[t] = {model.make_visual(row), model.make_imu(row)};
    gts[t] = Tensor::from({windows.size(), 6}, std::move(gt));
  }
  const TrainForward fwd = train_forward(model, inputs, gating, p_random, tau, rng);
  BatchLoss out;
  out.pose = pose_loss(fwd.poses, gts, alpha);
  out.efficiency = efficiency_loss(fwd.gates, lambda);
  out.total = joint_loss(out.pose, out.efficiency);
  std::size_t on = 0, n = 0;
  for (const auto& d : fwd.decisions) {
    for (int v : d) on += static_cast<std::size_t>(v);
    n += d.size();
  }
  out.usage = static_cast<double>(on) / static_cast<double>(n);
  return out;
}

namespace {

struct StageSpec {
  const char* name;
  TrainGating gating;
  double lambda;
  int epoch_offset;  // joint stage B continues the temperature schedule
};

void run_stage(VioModel& model, std::span<const sim::Sequence> train, const TrainSchedule& sched,
               const LossConfig& loss, const StageSpec& spec, std::span<nn::Adam* const> opts,
               const StageSchedule& stage, Rng& rng, std::vector<EpochLog>& logs,
               const EpochCallback& on_epoch) {
  const std::size_t steps = loss.seq_len - 1;
  std::vector<Window> windows = make_windows(train, steps, sched.window_stride);
  if (windows.empty()) {
    throw ConfigError("training sequences are shorter than seq_len (" +
                      std::to_string(loss.seq_len) + " frames)");
  }
  nn::ParamList params;
  for (nn::Adam* o : opts) params.insert(params.end(), o->params().begin(), o->params().end());
  for (int e = 0; e < stage.epochs; ++e) {
    const int epoch = spec.epoch_offset + e;
    const double tau = spec.gating != TrainGating::kRandom
                           ? gumbel::temperature(epoch, sched.tau0, sched.tau_decay)
                           : 0.0;
    // Fisher-Yates with our own generator keeps shuffles portable
    for (std::size_t i = windows.size(); i > 1; --i) {
      std::swap(windows[i - 1], windows[rng.below(i)]);
    }
    std::size_t batches = (windows.size() + sched.batch_size - 1) / sched.batch_size;
    if (stage.max_batches > 0) batches = std::min(batches, stage.max_batches);

    EpochLog log;
    log.stage = spec.name;
    log.epoch = epoch;
    log.tau = tau;
    log.lr = opts.front()->lr();
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * sched.batch_size;
      const std::size_t hi = std::min(windows.size(), lo + sched.batch_size);
      const auto batch = std::span<const Window>(windows).subspan(lo, hi - lo);
      BatchLoss bl = batch_loss(model, train, batch, steps, spec.gating, sched.warmup_visual_prob,
                                tau, spec.lambda, loss.alpha, rng);
      const double value = bl.total.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at " + std::string(spec.name) + " epoch " +
                                  std::to_string(epoch) + " step " + std::to_string(b),
                              epoch, static_cast<int>(b));
      }
      for (nn::Adam* o : opts) o->zero_grad();
      bl.total.backward();
      try {
        nn::clip_grad_norm(params, sched.clip_norm);
        for (nn::Adam* o : opts) o->step();
      } catch (const DomainError& err) {
        throw DivergenceError(std::string(err.what()) + " at " + spec.name + " epoch " +
                                  std::to_string(epoch) + " step " + std::to_string(b),
                              epoch, static_cast<int>(b));
      }
      log.loss += value;
      log.pose_loss += bl.pose.item();
      log.efficiency_loss += bl.efficiency.item();
      log.usage += bl.usage;
    }
    const double nb = static_cast<double>(batches);
    log.loss /= nb;
    log.pose_loss /= nb;
    log.efficiency_loss /= nb;
    log.usage /= nb;
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  for (nn::Adam* o : opts) o->zero_grad();
}

}  // namespace

std::vector<EpochLog> warmup_train(VioModel& model, std::span<const sim::Sequence> train,
                                   const TrainSchedule& schedule, const LossConfig& loss,
                                   Rng& rng, const EpochCallback& on_epoch) {
  schedule.validate();
  loss.validate();
  std::vector<EpochLog> logs;
  nn::Adam opt(model.pose_parameters(), {schedule.warmup.lr});
  nn::Adam* opts[] = {&opt};
  run_stage(model, train, schedule, loss, {"warmup", TrainGating::kRandom, 0.0, 0}, opts,
            schedule.warmup, rng, logs, on_epoch);
  return logs;
}

std::vector<EpochLog> joint_train(VioModel& model, std::span<const sim::Sequence> train,
                                  const TrainSchedule& schedule, const LossConfig& loss, Rng& rng,
                                  const EpochCallback& on_epoch) {
  schedule.validate();
  loss.validate();
  std::vector<EpochLog> logs;
  // separate optimizers so the policy can run at its own step size
  nn::Adam pose(model.pose_parameters(), {schedule.joint_a.lr});
  nn::Adam policy(model.policy_parameters(), {schedule.joint_a.effective_policy_lr()});
  nn::Adam* opts[] = {&pose, &policy};
  const TrainGating gating = schedule.relaxed_joint ? TrainGating::kRelaxed : TrainGating::kLearned;
  const StageSpec a{"joint", gating, loss.lambda, 0};
  run_stage(model, train, schedule, loss, a, opts, schedule.joint_a, rng, logs, on_epoch);
  pose.set_lr(schedule.joint_b.lr);
  policy.set_lr(schedule.joint_b.effective_policy_lr());
  const StageSpec b{"joint", gating, loss.lambda, schedule.joint_a.epochs};
  run_stage(model, train, schedule, loss, b, opts, schedule.joint_b, rng, logs, on_epoch);
  return logs;
}

}  // namespace vsvio
