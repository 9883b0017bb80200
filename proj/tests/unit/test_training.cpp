#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "vsvio/errors.hpp"
#include "vsvio/gumbel.hpp"
#include "vsvio/losses.hpp"
#include "vsvio/simkit.hpp"
#include "vsvio/trainer.hpp"

using namespace vsvio;

namespace {

std::vector<Tensor> rows(std::initializer_list<std::array<double, 6>> rs) {
  std::vector<Tensor> out;
  for (const auto& r : rs) out.push_back(Tensor::from({1, 6}, {r.begin(), r.end()}));
  return out;
}

sim::Dataset small_data(std::size_t frames = 60) {
  sim::SimConfig c;
  c.frames_per_sequence = frames;
  c.num_sequences = 4;
  return sim::generate_dataset(c, 3);
}

TrainSchedule tiny() {
  TrainSchedule s;
  s.warmup = {3, 1e-3, 4};
  s.joint_a = {2, 1e-4, 3, 1e-3};
  s.joint_b = {1, 1e-5, 3, 1e-4};
  s.batch_size = 4;
  return s;
}

std::vector<double> flat(const nn::ParamList& ps) {
  std::vector<double> out;
  for (const auto& [n, p] : ps) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

}  // namespace

TEST(Losses, PoseLossExamples) {
  const auto zero = rows({{0, 0, 0, 0, 0, 0}});
  EXPECT_EQ(pose_loss(zero, zero, 100).item(), 0.0);
  EXPECT_DOUBLE_EQ(pose_loss(rows({{0, 0, 0, 1, 1, 1}}), zero, 100).item(), 1.0);
  EXPECT_DOUBLE_EQ(pose_loss(rows({{1, 0, 0, 0, 0, 0}}), zero, 100).item(), 100.0 / 3.0);
  EXPECT_THROW(pose_loss(rows({{0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}}), zero, 100), DimensionError);
}

TEST(Losses, TensorAndScalarFormsAgree) {
  Rng rng(1);
  std::vector<geo::RelPose> p(10), g(10);
  std::vector<Tensor> pt, gt;
  for (std::size_t i = 0; i < 10; ++i) {
    p[i].phi = geo::Vec3(rng.normal(), rng.normal(), rng.normal());
    p[i].v = geo::Vec3(rng.normal(), rng.normal(), rng.normal());
    pt.push_back(Tensor::from({1, 6}, {p[i].phi.x(), p[i].phi.y(), p[i].phi.z(), p[i].v.x(), p[i].v.y(), p[i].v.z()}));
    gt.push_back(Tensor::zeros({1, 6}));
  }
  EXPECT_NEAR(pose_loss(pt, gt, 100).item(), pose_loss(p, g, 100), 1e-12);
}

TEST(Losses, EfficiencyAndJointExamples) {
  const int all[] = {1, 1, 1, 1};
  const int none[] = {0, 0, 0, 0};
  const int half[] = {1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(efficiency_loss(all, 3e-5), 3e-5);
  EXPECT_EQ(efficiency_loss(none, 3e-5), 0.0);
  EXPECT_DOUBLE_EQ(efficiency_loss(half, 1e-5), 5e-6);
  EXPECT_DOUBLE_EQ(joint_loss(0.5, 1e-5), 0.50001);
  EXPECT_EQ(joint_loss(0.25, 0.0), 0.25);
  std::vector<Tensor> gates = {Tensor::from({2, 1}, {1, 0}), Tensor::from({2, 1}, {1, 1})};
  EXPECT_DOUBLE_EQ(efficiency_loss(gates, 2.0).item(), 1.5);
}

TEST(Losses, ConfigValidation) {
  LossConfig c;
  c.alpha = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lambda = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Losses, JointGradientIsTheSumOfComponents) {
  auto ds = small_data();
  VioModel m;
  Rng init(2);
  m.init(init);
  fit_model_norm(m, ds.train());
  auto windows = make_windows(ds.train(), 10, 10);
  auto sub = std::span(windows).first(3);
  auto grads = [&](int which, double lambda) {
    for (auto& [n, p] : m.parameters()) p.zero_grad();
    Rng rng(9);
    auto bl = batch_loss(m, ds.train(), sub, 10, TrainGating::kLearned, 0.5, 1.0, lambda, 100, rng);
    (which == 0 ? bl.total : which == 1 ? bl.pose : bl.efficiency).backward();
    std::vector<double> g;
    for (auto& [n, p] : m.parameters()) {
      if (p.has_grad()) g.insert(g.end(), p.grad().begin(), p.grad().end());
      else g.insert(g.end(), p.numel(), 0.0);
    }
    return g;
  };
  const auto total = grads(0, 1e-3), pose = grads(1, 1e-3), eff = grads(2, 1e-3);
  double worst = 0;
  for (std::size_t i = 0; i < total.size(); ++i)
    worst = std::max(worst, std::abs(total[i] - pose[i] - eff[i]));
  EXPECT_LT(worst, 1e-12);
  // lambda = 0: exactly the pose gradient
  EXPECT_EQ(grads(0, 0.0), grads(1, 0.0));
}

TEST(Trainer, WindowsCoverEverySequence) {
  auto ds = small_data(41);
  auto w = make_windows(ds.train(), 10, 10);
  // 40 samples per sequence, windows of 10 every 10: starts 0,10,20,30
  EXPECT_EQ(w.size(), ds.train().size() * 4);
  EXPECT_EQ(w.back().start, 30u);
}

TEST(Trainer, WarmupLeavesPolicyUntouchedAndIsReproducible) {
  auto ds = small_data();
  auto run = [&] {
    VioModel m;
    Rng rng(4);
    m.init(rng);
    fit_model_norm(m, ds.train());
    const auto policy0 = flat(m.policy_parameters());
    auto logs = warmup_train(m, ds.train(), tiny(), LossConfig{}, rng);
    EXPECT_EQ(flat(m.policy_parameters()), policy0);
    return std::make_pair(flat(m.parameters()), logs);
  };
  auto [a, la] = run();
  auto [b, lb] = run();
  EXPECT_EQ(a, b);
  ASSERT_EQ(la.size(), 3u);
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la[i].loss, lb[i].loss);
  EXPECT_EQ(la[0].stage, "warmup");
}

TEST(Trainer, JointLogsTemperatureAndIsReproducible) {
  auto ds = small_data();
  auto run = [&] {
    VioModel m;
    Rng rng(5);
    m.init(rng);
    fit_model_norm(m, ds.train());
    LossConfig lc;
    lc.lambda = 1e-4;
    auto logs = joint_train(m, ds.train(), tiny(), lc, rng);
    return std::make_pair(flat(m.parameters()), logs);
  };
  auto [a, la] = run();
  auto [b, lb] = run();
  EXPECT_EQ(a, b);
  ASSERT_EQ(la.size(), 3u);
  for (std::size_t e = 0; e < la.size(); ++e) {
    EXPECT_EQ(la[e].stage, "joint");
    EXPECT_NEAR(la[e].tau, gumbel::temperature(static_cast<int>(e)), 1e-12);
    EXPECT_GE(la[e].usage, 0.1);  // forced first frame of every window
  }
  EXPECT_DOUBLE_EQ(la[2].lr, 1e-5);
}

TEST(Trainer, NonFiniteInputAbortsWithEpochAndStep) {
  auto ds = small_data();
  ds.sequences[0].samples[3].imu[0] = std::numeric_limits<double>::quiet_NaN();
  VioModel m;
  Rng rng(6);
  m.init(rng);
  try {
    warmup_train(m, ds.train(), tiny(), LossConfig{}, rng);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 0);
    EXPECT_GE(e.step(), 0);
  }
}

TEST(Trainer, ScheduleValidation) {
  auto s = TrainSchedule::desk();
  EXPECT_NO_THROW(s.validate());
  s.joint_b.lr = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  auto p = TrainSchedule::paper();
  EXPECT_EQ(p.warmup.epochs, 40);
  EXPECT_EQ(p.joint_a.epochs, 40);
  EXPECT_EQ(p.joint_b.epochs, 20);
  EXPECT_DOUBLE_EQ(p.warmup.lr, 5e-4);
  EXPECT_DOUBLE_EQ(p.joint_a.lr, 5e-5);
  EXPECT_DOUBLE_EQ(p.joint_b.lr, 1e-6);
  EXPECT_EQ(p.batch_size, 16u);
}

TEST(Trainer, RelaxedGatesAreSoftWithTheSameDecisions) {
  auto ds = small_data();
  VioModel m;
  Rng init(7);
  m.init(init);
  fit_model_norm(m, ds.train());
  auto windows = make_windows(ds.train(), 6, 10);
  std::vector<TrainStep> steps;
  std::vector<StepInput> row(windows.size());
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t b = 0; b < windows.size(); ++b) {
      const auto& s = ds.train()[windows[b].sequence].samples[windows[b].start + t];
      row[b] = {s.visual, s.imu};
    }
    steps.push_back({m.make_visual(row), m.make_imu(row)});
  }
  Rng r1(3), r2(3);
  auto hard = train_forward(m, steps, TrainGating::kLearned, 0.5, 2.0, r1);
  auto soft = train_forward(m, steps, TrainGating::kRelaxed, 0.5, 2.0, r2);
  EXPECT_EQ(hard.decisions, soft.decisions);
  for (std::size_t t = 1; t < 6; ++t) {
    for (std::size_t b = 0; b < windows.size(); ++b) {
      const double g = soft.gates[t].data()[b];
      EXPECT_GT(g, 0.0);
      EXPECT_LT(g, 1.0);
      // the hard decision is the larger relaxed component
      EXPECT_EQ(hard.gates[t].data()[b], g > 0.5 ? 1.0 : 0.0);
    }
  }
}
