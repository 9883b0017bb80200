#include "vsvio/config.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "vsvio/errors.hpp"

namespace vsvio {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (version != kConfigVersion)
    throw ConfigError("config: unsupported version " + std::to_string(version));
  sim.validate();
  model.validate();
  loss.validate();
  schedule.validate();
  if (model.visual_in != sim.visual_dim)
    throw ConfigError("config: model.visual_in must equal sim.visual_dim");
  if (model.imu_len != sim.window_len())
    throw ConfigError("config: model.imu_len must equal imu_rate / frame_rate + 1 = " +
                      std::to_string(sim.window_len()));
  if (seeds.empty()) throw ConfigError("config: seeds is empty");
  const auto& lad = lambda_absolute ? lambda_presets : lambda_fractions;
  if (lad.empty()) throw ConfigError("config: lambda ladder is empty");
  for (std::size_t i = 0; i < lad.size(); ++i) {
    if (!(lad[i] >= 0)) throw ConfigError("config: lambda ladder entries must be >= 0");
    if (i && !(lad[i] > lad[i - 1]))
      throw ConfigError("config: lambda ladder must be strictly increasing");
  }
  if (!(default_lambda_fraction >= 0))
    throw ConfigError("config: default_lambda_fraction must be >= 0");
}

std::vector<double> ExperimentConfig::ladder(double l0) const {
  if (lambda_absolute) return lambda_presets;
  std::vector<double> out;
  for (double f : lambda_fractions) out.push_back(f * l0);
  return out;
}

std::string to_json(const ExperimentConfig& c) {
  json j = {
      {"version", c.version},
      {"sim", jsonio::to_json(c.sim)},
      {"model", jsonio::to_json(c.model)},
      {"loss", jsonio::to_json(c.loss)},
      {"schedule", jsonio::to_json(c.schedule)},
      {"data_seed", c.data_seed},
      {"seeds", c.seeds},
      {"lambda_fractions", c.lambda_fractions},
      {"lambda_presets", c.lambda_presets},
      {"lambda_absolute", c.lambda_absolute},
      {"default_lambda_fraction", c.default_lambda_fraction},
  };
  return j.dump(2) + "\n";
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  jsonio::Reader r(j, "config");
  r.get("version", c.version);
  if (c.version != kConfigVersion)
    throw ConfigError("config: unsupported version " + std::to_string(c.version));
  if (const json* s = r.sub("sim")) jsonio::from_json(*s, c.sim, "sim");
  if (const json* m = r.sub("model")) jsonio::from_json(*m, c.model, "model");
  if (const json* l = r.sub("loss")) jsonio::from_json(*l, c.loss, "loss");
  if (const json* s = r.sub("schedule")) jsonio::from_json(*s, c.schedule, "schedule");
  r.get("data_seed", c.data_seed);
  r.get("seeds", c.seeds);
  r.get("lambda_fractions", c.lambda_fractions);
  r.get("lambda_presets", c.lambda_presets);
  r.get("lambda_absolute", c.lambda_absolute);
  r.get("default_lambda_fraction", c.default_lambda_fraction);
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string fingerprint(const ExperimentConfig& config) {
  const std::string text = to_json(config);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace vsvio
