#include "vsvio/simkit.hpp"

#include <algorithm>
#include <cmath>

#include "vsvio/errors.hpp"

namespace vsvio::sim {

namespace {

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }
double smoothstep_rate(double s) { return 6.0 * s * (1.0 - s); }

// Piecewise-smooth speed and curvature profile.
class Profile {
 public:
  Profile(double u0, std::span<const MotionSegment> segs) : segs_(segs.begin(), segs.end()) {
    double t = 0.0, u = u0, k = 0.0;
    for (const auto& s : segs_) {
      start_.push_back(t);
      u0_.push_back(u);
      k0_.push_back(k);
      t += s.duration;
      u = s.end_speed;
      k = s.end_curvature;
    }
    end_time_ = t;
    u_end_ = u;
    k_end_ = k;
  }

  struct Value {
    double u, du, kappa;
  };

  Value at(double t) const {
    if (segs_.empty() || t >= end_time_) return {u_end_, 0.0, k_end_};
    const auto it = std::upper_bound(start_.begin(), start_.end(), t);
    const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - start_.begin() - 1));
    const auto& seg = segs_[i];
    const double s = std::clamp((t - start_[i]) / seg.duration, 0.0, 1.0);
    const double w = smoothstep(s);
    const double du = (seg.end_speed - u0_[i]) * smoothstep_rate(s) / seg.duration;
    return {u0_[i] + (seg.end_speed - u0_[i]) * w, du, k0_[i] + (seg.end_curvature - k0_[i]) * w};
  }

  double end_time() const { return end_time_; }

 private:
  std::vector<MotionSegment> segs_;
  std::vector<double> start_, u0_, k0_;
  double end_time_ = 0.0;
  double u_end_ = 0.0;
  double k_end_ = 0.0;
};

}  // namespace

std::size_t SimConfig::imu_per_frame() const {
  const double r = imu_rate / frame_rate;
  const double l = std::round(r);
  if (!(l >= 1.0) || std::abs(r - l) > 1e-9) {
    throw ConfigError("imu_rate / frame_rate must be a positive integer");
  }
  return static_cast<std::size_t>(l);
}

void SimConfig::validate() const {
  if (!(frame_rate > 0) || !(imu_rate > 0)) throw ConfigError("sim: rates must be positive");
  (void)imu_per_frame();
  if (frames_per_sequence < 2) throw ConfigError("sim: frames_per_sequence must be >= 2");
  if (num_sequences < 1) throw ConfigError("sim: num_sequences must be >= 1");
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw ConfigError("sim: train_fraction must be in (0, 1)");
  }
  if (min_speed < 0 || max_speed <= min_speed || initial_speed < 0 || initial_speed > max_speed) {
    throw ConfigError("sim: need 0 <= min_speed < max_speed and initial_speed in [0, max_speed]");
  }
  if (!(max_accel > 0) || !(max_yaw_rate > 0)) {
    throw ConfigError("sim: max_accel and max_yaw_rate must be positive");
  }
  if (!(min_segment > 0) || max_segment < min_segment) {
    throw ConfigError("sim: need 0 < min_segment <= max_segment");
  }
  if (turn_probability < 0 || stop_probability < 0 || turn_probability + stop_probability > 1) {
    throw ConfigError("sim: turn/stop probabilities must be >= 0 and sum to <= 1");
  }
  for (double s : {gyro_noise, accel_noise, gyro_bias, accel_bias, vibration_noise,
                   pitch_disturbance, visual_snr}) {
    if (s < 0 || !std::isfinite(s)) throw ConfigError("sim: noise parameters must be >= 0");
  }
  if (!(pitch_correlation > 0)) throw ConfigError("sim: pitch_correlation must be positive");
  if (visual_dim < kPoseDim) throw ConfigError("sim: visual_dim must be >= 6");
  for (const auto& s : schedule) {
    if (!(s.duration > 0)) throw ConfigError("sim: segment durations must be positive");
  }
}

SimConfig SimConfig::noiseless() const {
  SimConfig c = *this;
  c.gyro_noise = c.accel_noise = c.gyro_bias = c.accel_bias = 0.0;
  c.vibration_noise = 0.0;
  c.pitch_disturbance = 0.0;
  c.visual_snr = 0.0;
  return c;
}

geo::Pose DenseStates::pose(std::size_t k) const {
  geo::Pose p;
  p.rotation = geo::euler_to_rot({0.0, 0.0, yaw[k]});
  p.translation = {x[k], y[k], 0.0};
  return p;
}

std::vector<StepInput> Sequence::inputs() const {
  std::vector<StepInput> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.visual, s.imu});
  return out;
}

std::vector<geo::RelPose> Sequence::gt_rels() const {
  std::vector<geo::RelPose> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.gt_rel);
  return out;
}

geo::Trajectory Sequence::gt_trajectory(double dt) const {
  const auto rels = gt_rels();
  return geo::accumulate(initial, rels, dt);
}

std::size_t Dataset::train_count() const {
  const std::size_t n = sequences.size();
  if (n < 2) return n;
  const auto k = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

std::span<const Sequence> Dataset::train() const {
  return std::span<const Sequence>(sequences).first(train_count());
}

std::span<const Sequence> Dataset::test() const {
  return std::span<const Sequence>(sequences).subspan(train_count());
}

// ---------------------------------------------------------------------------

std::vector<MotionSegment> random_schedule(const SimConfig& c, double duration, Rng& rng) {
  std::vector<MotionSegment> out;
  double t = 0.0, u = c.initial_speed, kappa = 0.0;
  const double accel_cap = 0.95 * c.max_accel;
  auto fit_duration = [&](double d, double u1) {
    // smoothstep peaks at 1.5x the mean rate
    return std::max(d, 1.5 * std::abs(u1 - u) / accel_cap);
  };
  while (t < duration) {
    MotionSegment s;
    if (kappa != 0.0) {
      s.duration = rng.uniform(2.0, 4.0);
      s.end_speed = u;
      s.end_curvature = 0.0;
    } else {
      const double r = rng.uniform();
      const double d = rng.uniform(c.min_segment, c.max_segment);
      if (r < c.stop_probability) {
        s.end_speed = std::max(c.min_speed, rng.uniform(0.0, 0.5));
        s.end_curvature = 0.0;
      } else if (r < c.stop_probability + c.turn_probability) {
        const double hi = std::min(9.0, c.max_speed);
        s.end_speed = rng.uniform(std::max(c.min_speed, 2.0), hi);
        const double omega = rng.uniform(0.15, 0.97) * c.max_yaw_rate;
        const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        s.end_curvature = sign * omega / std::max(u, s.end_speed);
      } else {
        s.end_speed = rng.uniform(std::max(c.min_speed, 1.0), c.max_speed);
        s.end_curvature = 0.0;
      }
      s.duration = fit_duration(d, s.end_speed);
    }
    out.push_back(s);
    t += s.duration;
    u = s.end_speed;
    kappa = s.end_curvature;
  }
  return out;
}

void validate_schedule(const SimConfig& c, std::span<const MotionSegment> schedule) {
  const Profile prof(c.initial_speed, schedule);
  const double step = 1e-3;
  const double tol = 1e-9;
  const auto n = static_cast<std::size_t>(std::ceil(prof.end_time() / step));
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = std::min(prof.end_time(), static_cast<double>(k) * step);
    const auto v = prof.at(t);
    if (v.u < -tol || v.u > c.max_speed + tol) {
      throw ConfigError("infeasible schedule: speed " + std::to_string(v.u) + " m/s at t = " +
                        std::to_string(t) + " s");
    }
    if (std::abs(v.du) > c.max_accel + tol) {
      throw ConfigError("infeasible schedule: acceleration " + std::to_string(v.du) +
                        " m/s^2 at t = " + std::to_string(t) + " s");
    }
    if (std::abs(v.u * v.kappa) > c.max_yaw_rate + tol) {
      throw ConfigError("infeasible schedule: curvature x speed = " +
                        std::to_string(std::abs(v.u * v.kappa)) + " rad/s exceeds bound " +
                        std::to_string(c.max_yaw_rate) + " at t = " + std::to_string(t) + " s");
    }
  }
}

DenseStates generate_trajectory(const SimConfig& c, std::span<const MotionSegment> schedule,
                                std::size_t ticks) {
  validate_schedule(c, schedule);
  const Profile prof(c.initial_speed, schedule);
  DenseStates s;
  s.dt = 1.0 / c.imu_rate;
  const std::size_t n = ticks + 1;
  for (auto* v : {&s.t, &s.x, &s.y, &s.yaw, &s.speed, &s.accel, &s.yaw_rate}) v->resize(n);
  const double h = s.dt;
  for (std::size_t k = 0; k < n; ++k) {
    s.t[k] = h * static_cast<double>(k);
    const auto v = prof.at(s.t[k]);
    s.speed[k] = v.u;
    s.accel[k] = v.du;
    s.yaw_rate[k] = v.u * v.kappa;
    if (k == 0) {
      s.x[0] = s.y[0] = s.yaw[0] = 0.0;
      continue;
    }
    const auto mid = prof.at(s.t[k - 1] + 0.5 * h);
    s.yaw[k] = s.yaw[k - 1] + h * mid.u * mid.kappa;
    const double yaw_mid = 0.5 * (s.yaw[k - 1] + s.yaw[k]);
    s.x[k] = s.x[k - 1] + h * mid.u * std::cos(yaw_mid);
    s.y[k] = s.y[k - 1] + h * mid.u * std::sin(yaw_mid);
  }
  return s;
}

DenseStates generate_trajectory(const SimConfig& c, Rng& rng) {
  c.validate();
  const std::size_t ticks = (c.frames_per_sequence - 1) * c.imu_per_frame();
  const double duration = static_cast<double>(ticks) / c.imu_rate;
  if (!c.schedule.empty()) return generate_trajectory(c, c.schedule, ticks);
  const auto sched = random_schedule(c, duration, rng);
  return generate_trajectory(c, sched, ticks);
}

std::vector<geo::Pose> frame_poses(const DenseStates& states, std::size_t l) {
  std::vector<geo::Pose> out;
  for (std::size_t k = 0; k < states.size(); k += l) out.push_back(states.pose(k));
  return out;
}

std::vector<std::vector<double>> synthesize_imu(const DenseStates& s, const SimConfig& c,
                                                const std::array<double, 3>& bg,
                                                const std::array<double, 3>& ba, Rng& rng) {
  const std::size_t l = c.imu_per_frame();
  const std::size_t len = l + 1;
  const std::size_t frames = (s.size() - 1) / l + 1;
  // one reading per tick so shared endpoints carry identical values
  std::vector<std::array<double, 6>> reading(s.size());
  const double rho = std::exp(-s.dt / c.pitch_correlation);
  const double innov = std::sqrt(1.0 - rho * rho);
  double wobble = rng.normal();  // unit-variance AR(1), scaled by speed below
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k > 0) wobble = rho * wobble + innov * rng.normal();
    const double u = s.speed[k];
    const double w = s.yaw_rate[k];
    const double sa = std::hypot(c.accel_noise, c.vibration_noise * u);
    auto& r = reading[k];
    r[0] = bg[0] + c.gyro_noise * rng.normal();
    r[1] = bg[1] + c.gyro_noise * rng.normal();
    r[2] = w + bg[2] + c.gyro_noise * rng.normal();
    r[3] = s.accel[k] + ba[0] + c.pitch_disturbance * u * wobble + sa * rng.normal();
    r[4] = u * w + ba[1] + sa * rng.normal();
    r[5] = c.gravity + ba[2] + sa * rng.normal();
  }
  std::vector<std::vector<double>> windows(frames - 1, std::vector<double>(6 * len));
  for (std::size_t f = 0; f + 1 < frames; ++f)
    for (std::size_t j = 0; j < len; ++j)
      for (std::size_t ch = 0; ch < 6; ++ch) windows[f][ch * len + j] = reading[f * l + j][ch];
  return windows;
}

std::vector<double> make_embedding(std::size_t visual_dim, Rng& rng) {
  std::vector<double> e(visual_dim * kPoseDim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(visual_dim));
  for (double& v : e) v = sd * rng.normal();
  return e;
}

double synthesize_visual(std::span<Sample> samples, std::span<const double> embedding,
                         std::size_t visual_dim, double snr, Rng& rng) {
  if (embedding.size() != visual_dim * kPoseDim) {
    throw DimensionError("embedding must be visual_dim x 6");
  }
  double norm_sum = 0.0;
  for (auto& s : samples) {
    const double r[6] = {s.gt_rel.phi.x(), s.gt_rel.phi.y(), s.gt_rel.phi.z(),
                         s.gt_rel.v.x(),   s.gt_rel.v.y(),   s.gt_rel.v.z()};
    s.visual.assign(visual_dim, 0.0);
    double sq = 0.0;
    for (std::size_t i = 0; i < visual_dim; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kPoseDim; ++j) acc += embedding[i * kPoseDim + j] * r[j];
      s.visual[i] = acc;
      sq += acc * acc;
    }
    norm_sum += std::sqrt(sq);
  }
  if (snr <= 0.0 || samples.empty()) return 0.0;
  const double sigma = norm_sum / static_cast<double>(samples.size()) / snr;
  for (auto& s : samples)
    for (double& v : s.visual) v += sigma * rng.normal();
  return sigma;
}

Sequence generate_sequence(const SimConfig& c, std::span<const double> embedding,
                           std::uint64_t seed) {
  c.validate();
  const Rng root(seed);
  Rng motion = root.split(1);
  Rng bias = root.split(2);
  Rng imu_rng = root.split(3);
  Rng vis_rng = root.split(4);

  const std::size_t l = c.imu_per_frame();
  const DenseStates states = generate_trajectory(c, motion);
  const auto poses = frame_poses(states, l);

  Sequence seq;
  seq.seed = seed;
  seq.initial = poses.front();
  for (auto& b : seq.gyro_bias) b = bias.uniform(-c.gyro_bias, c.gyro_bias);
  for (auto& b : seq.accel_bias) b = bias.uniform(-c.accel_bias, c.accel_bias);

  auto windows = synthesize_imu(states, c, seq.gyro_bias, seq.accel_bias, imu_rng);
  const double dt = c.frame_dt();
  seq.samples.resize(poses.size() - 1);
  for (std::size_t f = 0; f + 1 < poses.size(); ++f) {
    Sample& s = seq.samples[f];
    s.imu = std::move(windows[f]);
    s.gt_rel = geo::relative(poses[f], poses[f + 1]);
    double sp = 0.0;
    for (std::size_t j = 0; j <= l; ++j) sp += states.speed[f * l + j];
    s.gt_speed = sp / static_cast<double>(l + 1);
    s.gt_yaw_rate = std::abs(states.yaw[(f + 1) * l] - states.yaw[f * l]) / dt;
  }
  seq.visual_sigma = synthesize_visual(seq.samples, embedding, c.visual_dim, c.visual_snr, vis_rng);
  return seq;
}

Dataset generate_dataset(const SimConfig& c, std::uint64_t seed) {
  c.validate();
  Dataset ds;
  ds.config = c;
  ds.seed = seed;
  Rng emb = Rng(seed).split(0);
  ds.embedding = make_embedding(c.visual_dim, emb);
  for (std::size_t i = 0; i < c.num_sequences; ++i) {
    ds.sequences.push_back(generate_sequence(c, ds.embedding, Rng::derive_seed(seed, i + 1)));
  }
  return ds;
}

InputNorm fit_input_norm(std::span<const Sequence> sequences) {
  InputNorm norm;
  std::array<double, 6> sum{}, sq{};
  std::size_t count = 0;
  double vsq = 0.0;
  std::size_t vcount = 0;
  for (const auto& seq : sequences) {
    for (const auto& s : seq.samples) {
      const std::size_t len = s.imu.size() / 6;
      for (std::size_t ch = 0; ch < 6; ++ch)
        for (std::size_t j = 0; j < len; ++j) {
          const double v = s.imu[ch * len + j];
          sum[ch] += v;
          sq[ch] += v * v;
        }
      count += len;
      for (double v : s.visual) vsq += v * v;
      vcount += s.visual.size();
    }
  }
  if (count == 0) return norm;
  // floor keeps near-constant channels (bias-only gyro axes) from being
  // blown up to unit variance noise
  constexpr double kStdFloor = 0.1;
  for (std::size_t ch = 0; ch < 6; ++ch) {
    const double m = sum[ch] / static_cast<double>(count);
    const double var = std::max(0.0, sq[ch] / static_cast<double>(count) - m * m);
    norm.imu_mean[ch] = m;
    norm.imu_scale[ch] = 1.0 / std::max(std::sqrt(var), kStdFloor);
  }
  std::array<double, kPoseDim> psum{}, psq{};
  std::size_t pcount = 0;
  for (const auto& seq : sequences) {
    for (const auto& s : seq.samples) {
      for (int k = 0; k < 3; ++k) {
        psum[k] += s.gt_rel.phi[k];
        psq[k] += s.gt_rel.phi[k] * s.gt_rel.phi[k];
        psum[3 + k] += s.gt_rel.v[k];
        psq[3 + k] += s.gt_rel.v[k] * s.gt_rel.v[k];
      }
      ++pcount;
    }
  }
  constexpr double kPoseFloor = 1e-3;
  for (std::size_t k = 0; k < kPoseDim; ++k) {
    const double m = psum[k] / static_cast<double>(pcount);
    const double var = std::max(0.0, psq[k] / static_cast<double>(pcount) - m * m);
    norm.pose_scale[k] = std::max(std::sqrt(var), kPoseFloor);
  }
  if (vcount > 0 && vsq > 0) norm.visual_scale = 1.0 / std::sqrt(vsq / static_cast<double>(vcount));
  return norm;
}

}  // namespace vsvio::sim
