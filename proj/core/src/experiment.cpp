#include "vsvio/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "vsvio/checkpoint.hpp"
#include "vsvio/errors.hpp"

namespace vsvio::experiment {

sim::Dataset make_dataset(const ExperimentConfig& config) {
  return sim::generate_dataset(config.sim, config.data_seed);
}

VioModel fresh_model(const ExperimentConfig& config, std::span<const sim::Sequence> train,
                     std::uint64_t seed) {
  VioModel model(config.model);
  Rng init = Rng(seed).split(0);
  model.init(init);
  fit_model_norm(model, train);
  return model;
}

Warm warmup(const ExperimentConfig& config, std::span<const sim::Sequence> train,
            std::uint64_t seed, const EpochCallback& on_epoch) {
  Warm w{fresh_model(config, train, seed), {}, 0.0};
  Rng rng = Rng(seed).split(1);
  w.logs = warmup_train(w.model, train, config.schedule, config.loss, rng, on_epoch);
  // the per-epoch loss is noisy under random gates; average the tail
  const std::size_t tail = std::min<std::size_t>(5, w.logs.size());
  for (std::size_t i = w.logs.size() - tail; i < w.logs.size(); ++i) w.l0 += w.logs[i].pose_loss;
  if (tail) w.l0 /= static_cast<double>(tail);
  return w;
}

std::vector<EpochLog> joint(VioModel& model, const ExperimentConfig& config,
                            std::span<const sim::Sequence> train, std::uint64_t seed,
                            double lambda, const EpochCallback& on_epoch) {
  LossConfig loss = config.loss;
  loss.lambda = lambda;
  Rng rng = Rng(seed).split(2);
  return joint_train(model, train, config.schedule, loss, rng, on_epoch);
}

void save_model(const std::filesystem::path& base, const VioModel& model,
                const ExperimentConfig& config, const ModelInfo& info) {
  using nlohmann::json;
  const InputNorm& n = model.norm();
  const FlopTable f = model.count_flops();
  json extra = {
      {"config", json::parse(to_json(config))},
      {"fingerprint", fingerprint(config)},
      {"norm",
       {{"imu_mean", n.imu_mean},
        {"imu_scale", n.imu_scale},
        {"visual_scale", n.visual_scale},
        {"pose_scale", n.pose_scale}}},
      {"flops",
       {{"visual", f.visual}, {"inertial", f.inertial}, {"policy", f.policy},
        {"rnn_head", f.rnn_head}}},
      {"pose_layout", "phi_roll,phi_pitch,phi_yaw,v_x,v_y,v_z"},
      {"info",
       {{"stage", info.stage}, {"seed", info.seed}, {"l0", info.l0}, {"lambda", info.lambda}}},
  };
  save_parameters(base, model.parameters(), extra.dump());
}

LoadedModel load_model(const std::filesystem::path& base) {
  using nlohmann::json;
  // The manifest is read twice: once for the config that sizes the model,
  // then for the values.
  auto meta = std::filesystem::path(base).concat(".json");
  std::ifstream in(meta);
  if (!in) throw FormatError("cannot open " + meta.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(meta.string() + ": " + e.what());
  }
  if (!m.contains("extra") || !m["extra"].contains("config") || !m["extra"].contains("norm"))
    throw FormatError(meta.string() + ": not a model checkpoint (no config or norm)");
  const json& extra = m["extra"];
  LoadedModel out{VioModel(), parse_config(extra["config"].dump()), {}};
  out.model = VioModel(out.config.model);
  try {
    InputNorm n;
    n.imu_mean = extra["norm"].at("imu_mean").get<std::array<double, kImuChannels>>();
    n.imu_scale = extra["norm"].at("imu_scale").get<std::array<double, kImuChannels>>();
    n.visual_scale = extra["norm"].at("visual_scale").get<double>();
    n.pose_scale = extra["norm"].at("pose_scale").get<std::array<double, kPoseDim>>();
    out.model.set_norm(n);
    if (extra.contains("info")) {
      const json& i = extra["info"];
      out.info.stage = i.value("stage", "");
      out.info.seed = i.value("seed", std::uint64_t{0});
      out.info.l0 = i.value("l0", 0.0);
      out.info.lambda = i.value("lambda", 0.0);
    }
  } catch (const json::exception& e) {
    throw FormatError(meta.string() + ": " + e.what());
  }
  auto params = out.model.parameters();
  load_parameters(base, params);
  return out;
}

std::vector<double> snapshot(const VioModel& model) {
  std::vector<double> out;
  for (const auto& [name, p] : model.parameters()) {
    auto d = p.data();
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

void restore(VioModel& model, std::span<const double> values) {
  std::size_t o = 0;
  for (auto& [name, p] : model.parameters()) {
    auto d = p.mutable_data();
    if (o + d.size() > values.size()) throw DimensionError("restore: snapshot too short");
    std::copy(values.begin() + o, values.begin() + o + d.size(), d.begin());
    o += d.size();
  }
  if (o != values.size()) throw DimensionError("restore: snapshot too long");
}

namespace {

std::pair<double, double> step_counts(std::span<const sim::Sequence> seqs) {
  double steps = 0.0;
  for (const auto& s : seqs) steps += static_cast<double>(s.samples.size());
  return {steps, static_cast<double>(seqs.size())};
}

}  // namespace

double matched_bernoulli_p(double usage, std::span<const sim::Sequence> sequences) {
  auto [n, forced] = step_counts(sequences);
  if (n <= forced) return 1.0;
  return std::clamp((usage * n - forced) / (n - forced), 0.0, 1.0);
}

double regular_usage(int n, std::span<const sim::Sequence> sequences) {
  double on = 0.0, steps = 0.0;
  for (const auto& s : sequences) {
    const auto m = s.samples.size();
    on += static_cast<double>((m + static_cast<std::size_t>(n) - 1) / static_cast<std::size_t>(n));
    steps += static_cast<double>(m);
  }
  return steps > 0 ? on / steps : 0.0;
}

int matched_regular_n(double usage, std::span<const sim::Sequence> sequences) {
  std::size_t longest = 1;
  for (const auto& s : sequences) longest = std::max(longest, s.samples.size());
  int best = 1;
  double best_gap = std::abs(regular_usage(1, sequences) - usage);
  for (int n = 2; n <= static_cast<int>(longest); ++n) {
    const double gap = std::abs(regular_usage(n, sequences) - usage);
    if (gap < best_gap) best = n, best_gap = gap;
    if (regular_usage(n, sequences) < usage - kMatchTolerance) break;
  }
  return best;
}

bool Comparison::learned_wins() const {
  return bernoulli_matched && regular_matched && learned.t_rel.mean < bernoulli.t_rel.mean &&
         learned.t_rel.mean < regular.t_rel.mean;
}

Comparison compare_baselines(const VioModel& model, std::span<const sim::Sequence> sequences,
                             std::uint64_t seed, double frame_dt, const std::string& fingerprint) {
  const std::uint64_t seeds[] = {seed};
  Comparison c;
  c.learned = evaluate(model, sequences, PolicyMode::learned(), seeds, frame_dt, false);
  const double u = c.learned.usage.mean;
  c.bernoulli = evaluate(model, sequences, PolicyMode::bernoulli(matched_bernoulli_p(u, sequences)),
                         seeds, frame_dt, false);
  c.regular = evaluate(model, sequences, PolicyMode::regular(matched_regular_n(u, sequences)),
                       seeds, frame_dt, false);
  c.bernoulli_matched = std::abs(c.bernoulli.usage.mean - u) <= kMatchTolerance;
  c.regular_matched = std::abs(c.regular.usage.mean - u) <= kMatchTolerance;
  for (RunReport* r : {&c.learned, &c.bernoulli, &c.regular}) {
    r->label = "matched";
    r->fingerprint = fingerprint;
  }
  return c;
}

double Sweep::mean_usage(std::size_t rung) const {
  double s = 0.0;
  for (const auto& seed : seeds) s += seed.reports.at(rung).usage.mean;
  return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
}

double Sweep::mean_trans_rmse(std::size_t rung) const {
  double s = 0.0;
  for (const auto& seed : seeds) s += seed.reports.at(rung).trans_rmse.mean;
  return seeds.empty() ? 0.0 : s / static_cast<double>(seeds.size());
}

RunReport Sweep::pooled(std::size_t rung) const {
  RunReport out;
  for (const auto& seed : seeds) {
    const RunReport& r = seed.reports.at(rung);
    if (out.seeds.empty()) {
      out.label = r.label;
      out.mode = r.mode;
      out.fingerprint = r.fingerprint;
    }
    out.seeds.insert(out.seeds.end(), r.seeds.begin(), r.seeds.end());
  }
  // lambda differs per seed when the ladder is relative; report the mean
  double lam = 0.0;
  for (const auto& seed : seeds) lam += seed.lambdas.at(rung);
  out.lambda = seeds.empty() ? 0.0 : lam / static_cast<double>(seeds.size());
  out.aggregate();
  return out;
}

Sweep sweep(const ExperimentConfig& config, const sim::Dataset& data, const Progress& progress,
            bool keep_params) {
  const auto t0 = std::chrono::steady_clock::now();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  const std::string fp = fingerprint(config);
  Sweep out;
  for (std::uint64_t seed : config.seeds) {
    Warm w = warmup(config, data.train(), seed);
    SeedSweep ss;
    ss.seed = seed;
    ss.l0 = w.l0;
    ss.lambdas = config.ladder(w.l0);
    char buf[128];
    std::snprintf(buf, sizeof buf, "seed %llu: warm-up done, L0 = %.6g",
                  static_cast<unsigned long long>(seed), w.l0);
    say(buf);
    const auto warm = snapshot(w.model);
    const std::uint64_t seeds[] = {seed};
    for (std::size_t k = 0; k < ss.lambdas.size(); ++k) {
      restore(w.model, warm);
      joint(w.model, config, data.train(), seed, ss.lambdas[k]);
      RunReport r = evaluate(w.model, data.test(), PolicyMode::learned(), seeds,
                             config.sim.frame_dt(), true);
      r.label = "sweep";
      r.lambda = ss.lambdas[k];
      r.fingerprint = fp;
      std::snprintf(buf, sizeof buf, "seed %llu: lambda %.4g usage %.3f trans_rmse %.5f t_rel %.3f",
                    static_cast<unsigned long long>(seed), ss.lambdas[k], r.usage.mean,
                    r.trans_rmse.mean, r.t_rel.mean);
      say(buf);
      ss.reports.push_back(std::move(r));
      if (keep_params) ss.params.push_back(snapshot(w.model));
    }
    out.seeds.push_back(std::move(ss));
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace vsvio::experiment
