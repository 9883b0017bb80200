#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vsvio/analysis.hpp"
#include "vsvio/errors.hpp"
#include "vsvio/simkit.hpp"

using namespace vsvio;

namespace {

sim::SimConfig small() {
  sim::SimConfig c;
  c.frames_per_sequence = 60;
  c.num_sequences = 4;
  c.visual_dim = 16;
  return c;
}

bool same(const sim::Dataset& a, const sim::Dataset& b) {
  if (a.sequences.size() != b.sequences.size() || a.embedding != b.embedding || a.seed != b.seed)
    return false;
  for (std::size_t i = 0; i < a.sequences.size(); ++i) {
    const auto &x = a.sequences[i], &y = b.sequences[i];
    if (x.seed != y.seed || x.visual_sigma != y.visual_sigma || x.gyro_bias != y.gyro_bias ||
        x.accel_bias != y.accel_bias || x.initial.rotation != y.initial.rotation ||
        x.initial.translation != y.initial.translation || x.samples.size() != y.samples.size())
      return false;
    for (std::size_t k = 0; k < x.samples.size(); ++k) {
      const auto &p = x.samples[k], &q = y.samples[k];
      if (p.visual != q.visual || p.imu != q.imu || p.gt_rel.phi != q.gt_rel.phi ||
          p.gt_rel.v != q.gt_rel.v || p.gt_speed != q.gt_speed || p.gt_yaw_rate != q.gt_yaw_rate)
        return false;
    }
  }
  return true;
}

}  // namespace

TEST(Sim, DatasetIsAPureFunctionOfSeedAndConfig) {
  auto c = small();
  EXPECT_TRUE(same(sim::generate_dataset(c, 5), sim::generate_dataset(c, 5)));
  EXPECT_FALSE(same(sim::generate_dataset(c, 5), sim::generate_dataset(c, 6)));
}

TEST(Sim, SplitIsSeventyThirtyBySequence) {
  auto c = small();
  c.num_sequences = 10;
  auto ds = sim::generate_dataset(c, 1);
  EXPECT_EQ(ds.train().size(), 7u);
  EXPECT_EQ(ds.test().size(), 3u);
  EXPECT_NE(ds.train().back().seed, ds.test().front().seed);
}

TEST(Sim, ImuWindowsAreSixByElevenAndShareEndpoints) {
  auto ds = sim::generate_dataset(small(), 2);
  const auto& s = ds.sequences[0].samples;
  ASSERT_EQ(s[0].imu.size(), 6u * 11);
  for (std::size_t ch = 0; ch < 6; ++ch) EXPECT_EQ(s[0].imu[ch * 11 + 10], s[1].imu[ch * 11]);
}

TEST(Sim, GravityOnLevelGround) {
  auto c = small().noiseless();
  auto ds = sim::generate_dataset(c, 3);
  for (const auto& smp : ds.sequences[0].samples)
    for (std::size_t j = 0; j < 11; ++j) EXPECT_DOUBLE_EQ(smp.imu[5 * 11 + j], 9.81);
}

TEST(Sim, AccumulatedRelativePosesReproduceDenseFramePoses) {
  auto c = small().noiseless();
  Rng rng(4);
  auto states = sim::generate_trajectory(c, rng);
  auto frames = sim::frame_poses(states, c.imu_per_frame());
  std::vector<geo::RelPose> rels;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) rels.push_back(geo::relative(frames[i], frames[i + 1]));
  auto traj = geo::accumulate(frames[0], rels);
  for (std::size_t i = 0; i < frames.size(); ++i)
    EXPECT_LT((traj.poses[i].translation - frames[i].translation).norm(), 1e-9);
}

TEST(Sim, VisualSnrMatchesTarget) {
  auto c = small();
  c.visual_snr = 10.0;
  auto ds = sim::generate_dataset(c, 7);
  for (const auto& seq : ds.sequences) {
    double norm = 0, resid = 0;
    std::size_t n = 0;
    for (const auto& s : seq.samples) {
      const double r[6] = {s.gt_rel.phi.x(), s.gt_rel.phi.y(), s.gt_rel.phi.z(),
                           s.gt_rel.v.x(),   s.gt_rel.v.y(),   s.gt_rel.v.z()};
      double sq = 0;
      for (std::size_t i = 0; i < c.visual_dim; ++i) {
        double clean = 0;
        for (std::size_t j = 0; j < 6; ++j) clean += ds.embedding[i * 6 + j] * r[j];
        sq += clean * clean;
        resid += (s.visual[i] - clean) * (s.visual[i] - clean);
        ++n;
      }
      norm += std::sqrt(sq);
    }
    const double snr = norm / seq.samples.size() / std::sqrt(resid / n);
    EXPECT_NEAR(snr, 10.0, 1.0);
  }
}

TEST(Sim, InfeasibleScheduleIsAConfigError) {
  auto c = small();
  c.initial_speed = 10.0;
  std::vector<sim::MotionSegment> sched = {{5.0, 10.0, 0.2}};  // 2 rad/s
  EXPECT_THROW(sim::validate_schedule(c, sched), ConfigError);
  c.schedule = sched;
  EXPECT_THROW(sim::generate_dataset(c, 1), ConfigError);
}

TEST(Sim, BadConfigsAreRejected) {
  auto c = small();
  c.imu_rate = 105;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small();
  c.train_fraction = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Sim, DefaultDataCoversTheAnalysisBins) {
  auto ds = sim::generate_dataset(sim::SimConfig{}, 2024);
  std::vector<int> speed(analysis::kSpeedBins), yaw(analysis::kYawBins);
  for (const auto& seq : ds.sequences)
    for (const auto& s : seq.samples) {
      if (auto b = analysis::bin_index(s.gt_speed, analysis::kSpeedBinWidth, analysis::kSpeedBins)) speed[*b]++;
      if (auto b = analysis::bin_index(s.gt_yaw_rate, analysis::kYawBinWidth, analysis::kYawBins)) yaw[*b]++;
    }
  for (int n : speed) EXPECT_GT(n, 0);
  for (int n : yaw) EXPECT_GT(n, 0);
}

TEST(DatasetIo, ExportLoadIsIdentity) {
  auto ds = sim::generate_dataset(small(), 9);
  auto dir = std::filesystem::temp_directory_path() / "vsvio_ds_roundtrip";
  std::filesystem::remove_all(dir);
  sim::export_dataset(ds, dir);
  auto back = sim::load_dataset(dir);
  EXPECT_TRUE(same(ds, back));
  EXPECT_EQ(back.config.frames_per_sequence, ds.config.frames_per_sequence);
  EXPECT_EQ(back.config.visual_snr, ds.config.visual_snr);
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, CorruptionIsDetected) {
  auto ds = sim::generate_dataset(small(), 9);
  auto dir = std::filesystem::temp_directory_path() / "vsvio_ds_corrupt";
  std::filesystem::remove_all(dir);
  sim::export_dataset(ds, dir);
  {
    std::fstream f(dir / "seq_0001.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    f.put('\x7f');
  }
  EXPECT_THROW(sim::load_dataset(dir), FormatError);
  std::filesystem::resize_file(dir / "seq_0001.bin", 64);
  EXPECT_THROW(sim::load_dataset(dir), FormatError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(sim::load_dataset(dir), FormatError);
}
