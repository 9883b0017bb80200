// vsvio: simulate data, train, evaluate and analyze gated VIO models.
//
// Exit codes: 0 ok, 1 other failure (I/O, bad files), 2 config or usage
// error, 3 numerical divergence.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vsvio/analysis.hpp"
#include "vsvio/config.hpp"
#include "vsvio/errors.hpp"
#include "vsvio/evaluate.hpp"
#include "vsvio/experiment.hpp"
#include "vsvio/geometry.hpp"
#include "vsvio/simkit.hpp"

namespace fs = std::filesystem;
using namespace vsvio;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<double> lambda;
  std::string mode = "learned";
  std::string out = "run";
  std::string data;
  std::string checkpoint;
  bool baselines = false;
  std::size_t trace_count = 3;
  std::string gt, pred, segments_out;
  double dt = 0.1;
};

ExperimentConfig resolve_config(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.seeds.empty()) c.seeds = o.seeds;
  c.validate();
  return c;
}

std::uint64_t run_seed(const Options& o, const ExperimentConfig& c) {
  return o.seed ? *o.seed : c.seeds.front();
}

sim::Dataset dataset_for(const Options& o, const ExperimentConfig& c) {
  if (o.data.empty()) return experiment::make_dataset(c);
  sim::Dataset ds = sim::load_dataset(o.data);
  if (ds.config.visual_dim != c.model.visual_in || ds.config.window_len() != c.model.imu_len)
    throw ConfigError("dataset " + o.data + " does not fit the model config");
  return ds;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw FormatError("cannot write " + p.string());
  return f;
}

void write_text(const fs::path& p, const std::string& text) { open_out(p) << text; }

void write_log(const fs::path& p, const std::vector<EpochLog>& logs) {
  auto f = open_out(p);
  f << "stage,epoch,loss,pose_loss,efficiency_loss,usage,tau,lr\n";
  for (const auto& l : logs) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%d,%.9g,%.9g,%.9g,%.6f,%.6f,%.3g\n", l.stage.c_str(), l.epoch,
                  l.loss, l.pose_loss, l.efficiency_loss, l.usage, l.tau, l.lr);
    f << buf;
  }
}

EpochCallback epoch_logger() {
  return [](const EpochLog& l) {
    spdlog::info("{} epoch {:3d} loss {:.6g} pose {:.6g} usage {:.3f} tau {:.3f}", l.stage, l.epoch,
                 l.loss, l.pose_loss, l.usage, l.tau);
  };
}

void write_traces(const fs::path& out, const RunReport& report, std::size_t count) {
  if (report.seeds.empty()) return;
  const auto& traces = report.seeds.front().traces;
  for (std::size_t i = 0; i < std::min(count, traces.size()); ++i) {
    const auto& t = traces[i];
    const std::string name = "seq" + std::to_string(t.sequence);
    auto f = open_out(out / "traces" / (name + ".csv"));
    analysis::write_trace_csv(f, t);
    write_text(out / "plots" / ("trace_" + name + ".svg"),
               analysis::trace_svg(t, "decisions, test sequence " + std::to_string(t.sequence)));
  }
}

void write_predicted_poses(const fs::path& out, const RunReport& report,
                           std::span<const sim::Sequence> seqs, double dt) {
  if (report.seeds.empty() || report.seeds.front().traces.empty()) return;
  const auto& trace = report.seeds.front().traces.front();
  fs::create_directories(out);
  geo::write_kitti_file((out / "poses_pred.txt").string(),
                        predicted_trajectory(seqs[trace.sequence], trace, dt));
  geo::write_kitti_file((out / "poses_gt.txt").string(), seqs[trace.sequence].gt_trajectory(dt));
}

void write_reports(const fs::path& out, std::span<const RunReport> reports) {
  auto f = open_out(out / "report.csv");
  write_report_csv(f, reports);
}

std::vector<std::uint64_t> eval_seeds(const Options& o, const ExperimentConfig& c) {
  if (!o.seeds.empty()) return o.seeds;
  if (o.seed) return {*o.seed};
  return c.seeds;
}

// --- subcommands ---------------------------------------------------------

int cmd_simulate(const Options& o) {
  auto c = resolve_config(o);
  if (o.seed) c.data_seed = *o.seed;
  auto ds = experiment::make_dataset(c);
  sim::export_dataset(ds, o.out);
  write_text(fs::path(o.out) / "config.json", to_json(c));
  spdlog::info("wrote {} sequences ({} train) to {}", ds.sequences.size(), ds.train_count(), o.out);
  return 0;
}

int cmd_warmup(const Options& o) {
  auto c = resolve_config(o);
  auto ds = dataset_for(o, c);
  const auto seed = run_seed(o, c);
  auto w = experiment::warmup(c, ds.train(), seed, epoch_logger());
  const fs::path out = o.out;
  experiment::save_model(out / "checkpoint", w.model, c, {"warmup", seed, w.l0, 0.0});
  write_log(out / "train_log.csv", w.logs);
  write_text(out / "config.json", to_json(c));
  spdlog::info("warm-up done, L0 = {:.6g}; checkpoint at {}", w.l0, (out / "checkpoint").string());
  return 0;
}

int cmd_train(const Options& o) {
  ExperimentConfig c;
  VioModel model;
  std::uint64_t seed = 0;
  double l0 = 0.0;
  std::vector<EpochLog> logs;
  std::optional<sim::Dataset> ds;
  if (!o.checkpoint.empty()) {
    auto loaded = experiment::load_model(o.checkpoint);
    if (loaded.info.stage != "warmup")
      throw ConfigError("train --checkpoint expects a warm-up checkpoint");
    c = o.config.empty() ? loaded.config : resolve_config(o);
    if (!o.seeds.empty()) c.seeds = o.seeds;
    model = std::move(loaded.model);
    seed = o.seed ? *o.seed : loaded.info.seed;
    l0 = loaded.info.l0;
    ds = dataset_for(o, c);
  } else {
    c = resolve_config(o);
    seed = run_seed(o, c);
    ds = dataset_for(o, c);
    auto w = experiment::warmup(c, ds->train(), seed, epoch_logger());
    model = std::move(w.model);
    l0 = w.l0;
    logs = std::move(w.logs);
  }
  const double lambda = o.lambda ? *o.lambda : c.default_lambda_fraction * l0;
  if (!(lambda >= 0)) throw ConfigError("--lambda must be >= 0");
  spdlog::info("joint training with lambda = {:.6g} (L0 = {:.6g})", lambda, l0);
  auto jl = experiment::joint(model, c, ds->train(), seed, lambda, epoch_logger());
  logs.insert(logs.end(), jl.begin(), jl.end());
  const fs::path out = o.out;
  experiment::save_model(out / "checkpoint", model, c, {"joint", seed, l0, lambda});
  write_log(out / "train_log.csv", logs);
  write_text(out / "config.json", to_json(c));
  spdlog::info("checkpoint at {}", (out / "checkpoint").string());
  return 0;
}

experiment::LoadedModel need_checkpoint(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  return experiment::load_model(o.checkpoint);
}

int cmd_eval(const Options& o) {
  auto m = need_checkpoint(o);
  auto ds = dataset_for(o, m.config);
  const auto seeds = eval_seeds(o, m.config);
  const double dt = m.config.sim.frame_dt();
  const std::string fp = fingerprint(m.config);
  const fs::path out = o.out;
  std::vector<RunReport> reports;
  if (o.baselines) {
    for (auto s : seeds) {
      auto cmp = experiment::compare_baselines(m.model, ds.test(), s, dt, fp);
      spdlog::info("seed {}: t_rel learned {:.3f} bernoulli {:.3f} ({}) regular {:.3f} ({}){}", s,
                   cmp.learned.t_rel.mean, cmp.bernoulli.t_rel.mean, cmp.bernoulli.mode,
                   cmp.regular.t_rel.mean, cmp.regular.mode,
                   cmp.learned_wins() ? "  learned wins" : "");
      for (auto* r : {&cmp.learned, &cmp.bernoulli, &cmp.regular}) {
        r->lambda = m.info.lambda;
        reports.push_back(std::move(*r));
      }
    }
  } else {
    auto mode = PolicyMode::parse(o.mode);
    auto r = evaluate(m.model, ds.test(), mode, seeds, dt, true);
    r.label = "eval";
    r.lambda = m.info.lambda;
    r.fingerprint = fp;
    spdlog::info("{}: usage {:.3f} trans_rmse {:.5f} t_rel {:.3f} r_rel {:.3f}", r.mode,
                 r.usage.mean, r.trans_rmse.mean, r.t_rel.mean, r.r_rel.mean);
    write_traces(out, r, o.trace_count);
    write_predicted_poses(out, r, ds.test(), dt);
    reports.push_back(std::move(r));
  }
  write_reports(out, reports);
  return 0;
}

int cmd_sweep(const Options& o) {
  auto c = resolve_config(o);
  auto ds = dataset_for(o, c);
  auto sw = experiment::sweep(c, ds, [](const std::string& s) { spdlog::info("{}", s); });
  const fs::path out = o.out;
  std::vector<RunReport> reports;
  auto summary = open_out(out / "sweep.csv");
  summary << "rung,lambda_fraction,lambda_mean,usage_mean,usage_std,trans_rmse_mean,"
             "trans_rmse_std,t_rel_mean,gflops_per_step\n";
  const auto& lad = c.lambda_absolute ? c.lambda_presets : c.lambda_fractions;
  for (std::size_t k = 0; k < lad.size(); ++k) {
    RunReport r = sw.pooled(k);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%.6f,%.6f,%.9g,%.9g,%.6f,%.9g\n", k,
                  c.lambda_absolute ? 0.0 : lad[k], r.lambda, r.usage.mean, r.usage.std,
                  r.trans_rmse.mean, r.trans_rmse.std, r.t_rel.mean, r.gflops_per_step.mean);
    summary << buf;
    r.label = "sweep_rung" + std::to_string(k);
    for (auto& s : r.seeds) s.traces.clear();
    reports.push_back(std::move(r));
  }
  write_reports(out, reports);
  write_text(out / "config.json", to_json(c));
  spdlog::info("sweep finished in {:.0f} s", sw.seconds);
  return 0;
}

int cmd_analyze(const Options& o) {
  auto m = need_checkpoint(o);
  auto ds = dataset_for(o, m.config);
  const auto seeds = eval_seeds(o, m.config);
  auto r = evaluate(m.model, ds.test(), PolicyMode::learned(), seeds, m.config.sim.frame_dt(), true);
  r.label = "analyze";
  r.lambda = m.info.lambda;
  r.fingerprint = fingerprint(m.config);
  const fs::path out = o.out;
  auto tables = analysis::usage_analysis(r);
  for (const auto* t : {&tables.speed, &tables.yaw_rate}) {
    auto f = open_out(out / ("usage_" + t->quantity + ".csv"));
    analysis::write_bins_csv(f, *t);
    write_text(out / "plots" / ("usage_" + t->quantity + ".svg"),
               analysis::bins_svg(*t, "visual usage by " + t->quantity));
  }
  write_traces(out, r, o.trace_count);
  const auto rho = analysis::speed_usage_correlation(tables.speed);
  const auto reset = analysis::reset_stats(r);
  auto f = open_out(out / "summary.csv");
  f << "usage,speed_spearman,reset_fraction,firings\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.6f,%s,%.6f,%zu\n", r.usage.mean,
                rho ? std::to_string(*rho).c_str() : "", reset.fraction(), reset.firings);
  f << buf;
  spdlog::info("usage {:.3f}, speed Spearman {}, reset fraction {:.3f} over {} firings",
               r.usage.mean, rho ? std::to_string(*rho) : "n/a", reset.fraction(), reset.firings);
  write_reports(out, std::vector<RunReport>{r});
  return 0;
}

int cmd_metrics(const Options& o) {
  if (o.gt.empty() || o.pred.empty()) throw ConfigError("metrics needs --gt and --pred");
  auto gt = geo::read_kitti_file(o.gt, o.dt);
  auto pred = geo::read_kitti_file(o.pred, o.dt);
  if (gt.poses.size() != pred.poses.size())
    throw ConfigError("pose files differ in length: " + std::to_string(gt.poses.size()) + " vs " +
                      std::to_string(pred.poses.size()));
  auto rm = geo::rmse(geo::decompose(pred), geo::decompose(gt));
  auto rel = geo::kitti_rel_errors(pred, gt);
  std::printf("frames %zu\ntrans_rmse_m %.9g\nrot_rmse_rad %.9g\n", gt.poses.size(),
              rm.translation, rm.rotation);
  if (rel) {
    std::printf("t_rel_pct %.9g\nr_rel_deg_per_100m %.9g\nsegments %zu\n", rel->t_rel, rel->r_rel,
                rel->segments.size());
    if (!o.segments_out.empty()) {
      auto f = open_out(fs::path(o.segments_out) / "segments.csv");
      geo::write_segment_csv(f, rel->segments);
    }
  } else {
    std::printf("t_rel_pct n/a (path shorter than 100 m)\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual-selective VIO toolkit"};
  app.require_subcommand(0, 1);
  Options o;
  bool dump = false;
  app.add_flag("--print-config", dump, "Print the resolved config (defaults + --config) and exit");
  app.add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);

  auto common = [&](CLI::App* sub, bool training) {
    sub->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "Run seed (simulate: dataset seed)");
    sub->add_option("--seeds", o.seeds, "Seed list, comma separated")->delimiter(',');
    if (training) sub->add_option("--data", o.data, "Dataset directory from `simulate`");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate and export a synthetic dataset");
  common(simulate, false);
  auto* warmup = app.add_subcommand("warmup", "Warm-up stage with a random 50% visual policy");
  common(warmup, true);
  auto* train = app.add_subcommand("train", "Warm-up (or --checkpoint) then joint training");
  common(train, true);
  train->add_option("--checkpoint", o.checkpoint, "Warm-up checkpoint base path");
  train->add_option("--lambda", o.lambda, "Absolute usage penalty (default: fraction x L0)");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  common(eval, true);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint base path")->required();
  eval->add_option("--mode", o.mode, "learned|bernoulli:<p>|regular:<n>|always")
      ->capture_default_str();
  eval->add_flag("--baselines", o.baselines, "Learned vs usage-matched bernoulli and regular");
  eval->add_option("--traces", o.trace_count, "Decision traces to write")->capture_default_str();
  auto* sweep = app.add_subcommand("sweep", "Lambda ladder over all seeds");
  common(sweep, true);
  auto* analyze = app.add_subcommand("analyze", "Usage bins, decision traces, reset statistics");
  common(analyze, true);
  analyze->add_option("--checkpoint", o.checkpoint, "Checkpoint base path")->required();
  analyze->add_option("--traces", o.trace_count, "Decision traces to write")->capture_default_str();
  auto* metrics = app.add_subcommand("metrics", "RMSE and segment errors of KITTI pose files");
  metrics->add_option("--gt", o.gt, "Ground-truth poses")->required()->check(CLI::ExistingFile);
  metrics->add_option("--pred", o.pred, "Predicted poses")->required()->check(CLI::ExistingFile);
  metrics->add_option("--dt", o.dt, "Frame period, s")->capture_default_str();
  metrics->add_option("--out", o.segments_out, "Directory for segments.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (dump) {
      std::fputs(to_json(resolve_config(o)).c_str(), stdout);
      return 0;
    }
    if (*simulate) return cmd_simulate(o);
    if (*warmup) return cmd_warmup(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*sweep) return cmd_sweep(o);
    if (*analyze) return cmd_analyze(o);
    if (*metrics) return cmd_metrics(o);
    std::fputs(app.help().c_str(), stderr);
    return 2;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  } catch (const DivergenceError& e) {
    spdlog::error("diverged at epoch {} step {}: {}", e.epoch(), e.step(), e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
