#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include "json.hpp"

#include "vsvio/checkpoint.hpp"
#include "vsvio/config.hpp"
#include "vsvio/errors.hpp"
#include "vsvio/experiment.hpp"

using namespace vsvio;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const char* name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<double> values(const VioModel& m) { return experiment::snapshot(m); }

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  auto dir = tmp("vsvio_ckpt");
  VioModel a, b;
  Rng r1(1), r2(2);
  a.init(r1);
  b.init(r2);
  auto pa = a.parameters();
  save_parameters(dir / "m", pa, R"({"note":"x"})");
  auto pb = b.parameters();
  auto extra = load_parameters(dir / "m", pb);
  EXPECT_EQ(values(a), values(b));
  EXPECT_EQ(nlohmann::json::parse(extra)["note"], "x");

  auto manifest = nlohmann::json::parse(std::ifstream(dir / "m.json"));
  EXPECT_EQ(manifest["lstm_gate_order"], kLstmGateOrder);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 8 * values(a).size());
  fs::remove_all(dir);
}

TEST(Checkpoint, MismatchAndCorruptionAreFormatErrors) {
  auto dir = tmp("vsvio_ckpt_bad");
  VioModel a;
  Rng rng(1);
  a.init(rng);
  auto pa = a.parameters();
  save_parameters(dir / "m", pa);

  ModelConfig other;
  other.hidden = 32;
  VioModel small(other);
  auto ps = small.parameters();
  EXPECT_THROW(load_parameters(dir / "m", ps), FormatError);

  {
    std::fstream f(dir / "m.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(16);
    f.put('\x55');
  }
  EXPECT_THROW(load_parameters(dir / "m", pa), FormatError);
  EXPECT_THROW(load_parameters(dir / "missing", pa), FormatError);
  fs::remove_all(dir);
}

TEST(Checkpoint, LittleEndianHelpers) {
  std::stringstream ss;
  const double v[] = {1.0, -2.5};
  write_f64_le(ss, v);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x3f);  // 1.0 = 3ff0...
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0xf0);
  EXPECT_EQ(read_f64_le(ss, 2), std::vector<double>(v, v + 2));
}

TEST(Config, DefaultsRoundTripCanonically) {
  ExperimentConfig c;
  const auto text = to_json(c);
  auto back = parse_config(text);
  EXPECT_EQ(to_json(back), text);
  EXPECT_EQ(fingerprint(back), fingerprint(c));
  EXPECT_EQ(fingerprint(c).size(), 8u);
  c.seeds = {7};
  EXPECT_NE(fingerprint(c), fingerprint(back));
}

TEST(Config, PartialFilesFallBackToDefaults) {
  auto c = parse_config(R"({"seeds": [3, 4], "loss": {"alpha": 50}})");
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(c.loss.alpha, 50);
  EXPECT_EQ(c.data_seed, ExperimentConfig{}.data_seed);
}

TEST(Config, BadFilesAreConfigErrors) {
  EXPECT_THROW(parse_config(R"({"seedz": [1]})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"sim": {"imu_rate": "fast"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"version": 99})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"seeds": []})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"lambda_fractions": [1, 0.5]})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"sim": {"visual_dim": 32}})"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, LadderScalesWithL0UnlessAbsolute) {
  ExperimentConfig c;
  c.lambda_fractions = {0.5, 2};
  EXPECT_EQ(c.ladder(2e-4), (std::vector<double>{1e-4, 4e-4}));
  c.lambda_absolute = true;
  EXPECT_EQ(c.ladder(2e-4), c.lambda_presets);
}

TEST(Experiment, SaveLoadModelKeepsNormAndInfo) {
  auto dir = tmp("vsvio_model");
  ExperimentConfig cfg;
  cfg.sim.frames_per_sequence = 30;
  cfg.sim.num_sequences = 3;
  auto ds = experiment::make_dataset(cfg);
  auto m = experiment::fresh_model(cfg, ds.train(), 5);
  experiment::save_model(dir / "ck", m, cfg, {"joint", 5, 1.5e-4, 3e-5});
  auto back = experiment::load_model(dir / "ck");
  EXPECT_EQ(values(back.model), values(m));
  EXPECT_EQ(back.info.stage, "joint");
  EXPECT_EQ(back.info.seed, 5u);
  EXPECT_EQ(back.info.lambda, 3e-5);
  EXPECT_EQ(fingerprint(back.config), fingerprint(cfg));
  // identical rollouts prove the normalization came back too
  auto in = ds.test().front().inputs();
  Rng r1(3), r2(3);
  auto a = rollout(m, in, PolicyMode::always(), r1);
  auto b = rollout(back.model, in, PolicyMode::always(), r2);
  for (std::size_t t = 0; t < a.poses.size(); ++t) EXPECT_EQ(a.poses[t].v, b.poses[t].v);
  fs::remove_all(dir);
}

TEST(Experiment, UsageMatching) {
  sim::SimConfig c;
  c.frames_per_sequence = 11;  // 10 steps per sequence
  c.num_sequences = 4;
  auto ds = sim::generate_dataset(c, 1);
  auto seqs = std::span(ds.sequences);
  // 40 steps, 4 forced: usage u needs p with 4 + 36 p = 40 u
  EXPECT_DOUBLE_EQ(experiment::matched_bernoulli_p(0.55, seqs), 0.5);
  EXPECT_DOUBLE_EQ(experiment::matched_bernoulli_p(0.05, seqs), 0.0);
  EXPECT_DOUBLE_EQ(experiment::regular_usage(3, seqs), 0.4);  // t = 0,3,6,9
  EXPECT_EQ(experiment::matched_regular_n(0.41, seqs), 3);
  EXPECT_EQ(experiment::matched_regular_n(1.0, seqs), 1);
}
