#include "vsvio/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "vsvio/geometry.hpp"

namespace vsvio {

Stat mean_std(std::span<const double> values) {
  Stat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  // identical runs (deterministic modes) report exactly zero spread
  if (values.size() < 2 || std::ranges::all_of(values, [&](double v) { return v == values[0]; })) {
    return s;
  }
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return s;
}

void RunReport::aggregate() {
  auto stat = [&](double SeedResult::*field) {
    std::vector<double> v;
    for (const auto& s : seeds) v.push_back(s.*field);
    return mean_std(v);
  };
  usage = stat(&SeedResult::usage);
  gflops_per_step = stat(&SeedResult::gflops_per_step);
  trans_rmse = stat(&SeedResult::trans_rmse);
  rot_rmse = stat(&SeedResult::rot_rmse);
  t_rel = stat(&SeedResult::t_rel);
  r_rel = stat(&SeedResult::r_rel);
}

geo::Trajectory predicted_trajectory(const sim::Sequence& seq, const SequenceTrace& trace,
                                     double frame_dt) {
  return geo::accumulate(seq.initial, trace.pred, frame_dt);
}

RunReport evaluate(const VioModel& model, std::span<const sim::Sequence> sequences,
                   const PolicyMode& mode, std::span<const std::uint64_t> seeds, double frame_dt,
                   bool keep_traces) {
  RunReport report;
  report.mode = mode.to_string();
  for (std::uint64_t seed : seeds) {
    SeedResult res;
    res.seed = seed;
    std::vector<geo::RelPose> all_pred, all_gt;
    std::size_t on = 0;
    double t_sum = 0.0, r_sum = 0.0;
    std::size_t segments = 0;
    const Rng base(seed);
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const auto& seq = sequences[i];
      Rng rng = base.split(i);
      const auto inputs = seq.inputs();
      RolloutResult r = rollout(model, inputs, mode, rng);
      const auto gt = seq.gt_rels();
      all_pred.insert(all_pred.end(), r.poses.begin(), r.poses.end());
      all_gt.insert(all_gt.end(), gt.begin(), gt.end());
      for (int d : r.decisions) on += static_cast<std::size_t>(d);
      res.flops += r.flops;
      res.steps += r.decisions.size();

      const geo::Trajectory pt = geo::accumulate(seq.initial, r.poses, frame_dt);
      const geo::Trajectory gtt = geo::accumulate(seq.initial, gt, frame_dt);
      if (auto rel = geo::kitti_rel_errors(pt, gtt)) {
        for (const auto& s : rel->segments) {
          t_sum += s.t_err_pct;
          r_sum += s.r_err_deg_per_100m;
        }
        segments += rel->segments.size();
      }
      if (keep_traces) {
        SequenceTrace tr;
        tr.sequence = i;
        tr.decisions = std::move(r.decisions);
        tr.p_visual = std::move(r.p_visual);
        tr.pred = std::move(r.poses);
        for (const auto& s : seq.samples) {
          tr.speed.push_back(s.gt_speed);
          tr.yaw_rate.push_back(s.gt_yaw_rate);
        }
        res.traces.push_back(std::move(tr));
      }
    }
    const auto rm = geo::rmse(all_pred, all_gt);
    res.trans_rmse = rm.translation;
    res.rot_rmse = rm.rotation;
    const double n = static_cast<double>(res.steps);
    res.usage = n > 0 ? static_cast<double>(on) / n : 0.0;
    res.gflops_per_step = n > 0 ? static_cast<double>(res.flops) / n * 1e-9 : 0.0;
    if (segments > 0) {
      res.t_rel = t_sum / static_cast<double>(segments);
      res.r_rel = r_sum / static_cast<double>(segments);
    } else {
      res.t_rel = res.r_rel = std::nan("");
    }
    report.seeds.push_back(std::move(res));
  }
  report.aggregate();
  return report;
}

void write_report_csv(std::ostream& out, std::span<const RunReport> reports) {
  out << "label,mode,lambda,seed,usage_pct,gflops_per_step,trans_rmse_m,rot_rmse_rad,t_rel_pct,"
         "r_rel_deg_per_100m,fingerprint\n";
  char buf[512];
  for (const auto& r : reports) {
    auto row = [&](const std::string& seed, double u, double g, double tr, double rr, double t,
                   double rd) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%s,%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%s\n",
                    r.label.c_str(), r.mode.c_str(), r.lambda, seed.c_str(), u * 100.0, g, tr, rr,
                    t, rd, r.fingerprint.c_str());
      out << buf;
    };
    for (const auto& s : r.seeds) {
      row(std::to_string(s.seed), s.usage, s.gflops_per_step, s.trans_rmse, s.rot_rmse, s.t_rel,
          s.r_rel);
    }
    row("mean", r.usage.mean, r.gflops_per_step.mean, r.trans_rmse.mean, r.rot_rmse.mean,
        r.t_rel.mean, r.r_rel.mean);
    if (r.seeds.size() >= 2) {
      row("std", r.usage.std, r.gflops_per_step.std, r.trans_rmse.std, r.rot_rmse.std, r.t_rel.std,
          r.r_rel.std);
    }
  }
}

}  // namespace vsvio
