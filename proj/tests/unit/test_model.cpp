#include <gtest/gtest.h>

#include "vsvio/errors.hpp"
#include "vsvio/model.hpp"
#include "vsvio/simkit.hpp"
#include "vsvio/trainer.hpp"

using namespace vsvio;

namespace {

struct Fixture {
  sim::Dataset ds;
  VioModel model;
  Fixture() {
    sim::SimConfig c;
    c.frames_per_sequence = 40;
    c.num_sequences = 3;
    ds = sim::generate_dataset(c, 1);
    Rng rng(2);
    model.init(rng);
    fit_model_norm(model, ds.train());
  }
};

// Layer sizes of the default config worked out by hand:
//   visual 64-256-256-64, inertial 3 convs (k3, pad 1, strides 2,2,1) on 11
//   samples -> lengths 6,3,3 then 24 -> 32, policy 96-32-32-2,
//   LSTM 96->64, 64->64, head 64-64-6.
constexpr std::uint64_t lin(std::uint64_t i, std::uint64_t o) { return 2 * i * o + o; }
constexpr std::uint64_t conv(std::uint64_t c, std::uint64_t o, std::uint64_t l) { return 2 * o * c * 3 * l + o * l; }
constexpr std::uint64_t lstm(std::uint64_t i, std::uint64_t h) { return 2 * 4 * h * (i + h) + 13 * h; }

}  // namespace

TEST(Flops, DefaultTableByHand) {
  VioModel m;
  auto t = m.count_flops();
  EXPECT_EQ(t.visual, lin(64, 256) + lin(256, 256) + lin(256, 64));
  EXPECT_EQ(t.inertial, conv(6, 8, 6) + conv(8, 8, 3) + conv(8, 8, 3) + lin(24, 32));
  EXPECT_EQ(t.policy, lin(96, 32) + lin(32, 32) + lin(32, 2));
  EXPECT_EQ(t.rnn_head, lstm(96, 64) + lstm(64, 64) + lin(64, 64) + lin(64, 6));
  EXPECT_EQ(t.visual, 197184u);
  EXPECT_GE(t.visual, 20 * t.inertial);
}

TEST(Flops, GatedFlopsAreAffineInUsage) {
  EXPECT_DOUBLE_EQ(gated_flops(10, 100, 0.0), 10);
  EXPECT_DOUBLE_EQ(gated_flops(10, 100, 0.25), 35);
  EXPECT_DOUBLE_EQ(gated_flops(10, 100, 1.0), 110);
}

TEST(Model, ConfigValidation) {
  ModelConfig c;
  c.inertial_strides = {2, 2};
  EXPECT_THROW(VioModel{c}, ConfigError);
  c = ModelConfig{};
  c.hidden = 0;
  EXPECT_THROW(VioModel{c}, ConfigError);
}

TEST(PolicyModeParse, GoodAndBad) {
  EXPECT_EQ(PolicyMode::parse("learned").kind, PolicyMode::Kind::kLearned);
  EXPECT_EQ(PolicyMode::parse("always").kind, PolicyMode::Kind::kAlways);
  EXPECT_DOUBLE_EQ(PolicyMode::parse("bernoulli:0.3").p, 0.3);
  EXPECT_EQ(PolicyMode::parse("regular:4").n, 4);
  EXPECT_EQ(PolicyMode::parse("regular:4").to_string(), "regular:4");
  for (const char* bad : {"", "sometimes", "bernoulli:", "bernoulli:1.5", "regular:0", "regular:x"})
    EXPECT_THROW(PolicyMode::parse(bad), ConfigError) << bad;
}

TEST(Rollout, RegularScheduleAndForcedFirstFrame) {
  Fixture f;
  auto in = f.ds.sequences[0].inputs();
  Rng rng(3);
  auto r = rollout(f.model, in, PolicyMode::regular(3), rng);
  for (std::size_t t = 0; t < r.decisions.size(); ++t) EXPECT_EQ(r.decisions[t], t % 3 == 0) << t;
  auto never = rollout(f.model, in, PolicyMode::bernoulli(0.0), rng);
  EXPECT_EQ(never.decisions[0], 1);
  for (std::size_t t = 1; t < never.decisions.size(); ++t) EXPECT_EQ(never.decisions[t], 0);
}

TEST(Rollout, FlopsFollowTheDecisions) {
  Fixture f;
  auto in = f.ds.sequences[0].inputs();
  const auto t = f.model.count_flops();
  Rng rng(4);
  for (auto mode : {PolicyMode::learned(), PolicyMode::bernoulli(0.4), PolicyMode::always()}) {
    auto r = rollout(f.model, in, mode, rng);
    std::uint64_t expected = 0;
    for (std::size_t s = 0; s < r.decisions.size(); ++s)
      expected += t.inertial + t.rnn_head + (r.decisions[s] ? t.visual : 0) +
                  (mode.kind == PolicyMode::Kind::kLearned && s > 0 ? t.policy : 0);
    EXPECT_EQ(r.flops, expected) << mode.to_string();
    double on = 0;
    for (int d : r.decisions) on += d;
    EXPECT_DOUBLE_EQ(r.usage, on / r.decisions.size());
  }
}

TEST(Rollout, LearnedProbabilitiesAreProbabilities) {
  Fixture f;
  auto in = f.ds.sequences[0].inputs();
  Rng rng(5);
  auto r = rollout(f.model, in, PolicyMode::learned(), rng, {true});
  EXPECT_EQ(r.p_visual[0], 1.0);
  for (double p : r.p_visual) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  ASSERT_EQ(r.hidden.size(), in.size());
  EXPECT_EQ(r.hidden[0].size(), 64u);
}

TEST(Rollout, SkippedVisualInputIsNeverRead) {
  Fixture f;
  const auto& seq = f.ds.sequences[0];
  auto in = seq.inputs();
  Rng r1(6), r2(6);
  auto a = rollout(f.model, in, PolicyMode::regular(1000), r1);
  std::vector<std::vector<double>> junk(in.size(), std::vector<double>(64));
  for (std::size_t t = 1; t < in.size(); ++t) {
    for (auto& v : junk[t]) v = 1e6 * (static_cast<double>(t) - 7.5);
    in[t].visual = junk[t];
  }
  auto b = rollout(f.model, in, PolicyMode::regular(1000), r2);
  for (std::size_t t = 0; t < a.poses.size(); ++t) {
    EXPECT_EQ(a.poses[t].v, b.poses[t].v);
    EXPECT_EQ(a.poses[t].phi, b.poses[t].phi);
  }
}

TEST(TrainForward, RandomGatesFirstStepAlwaysVisual) {
  Fixture f;
  auto windows = make_windows(f.ds.train(), 10, 10);
  ASSERT_FALSE(windows.empty());
  Rng rng(7);
  auto bl = batch_loss(f.model, f.ds.train(), std::span(windows).first(4), 10, TrainGating::kRandom,
                       0.0, 1.0, 0.0, 100.0, rng);
  // p = 0 keeps only the forced first frame: usage 1/10
  EXPECT_NEAR(bl.usage, 0.1, 1e-12);
}
