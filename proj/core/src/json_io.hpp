#pragma once

// JSON mapping of the configuration structs, shared by the dataset manifest
// and the experiment config. Readers are strict: unknown keys and wrong types
// raise ConfigError, missing keys keep the struct's default.

#include <json.hpp>

#include <set>
#include <string>

#include "vsvio/errors.hpp"
#include "vsvio/losses.hpp"
#include "vsvio/model.hpp"
#include "vsvio/simkit.hpp"
#include "vsvio/trainer.hpp"

namespace vsvio::jsonio {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  /// Raises ConfigError naming the first key that was never asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline json to_json(const sim::MotionSegment& s) {
  return {{"duration", s.duration}, {"end_speed", s.end_speed}, {"end_curvature", s.end_curvature}};
}

inline json to_json(const sim::SimConfig& c) {
  json schedule = json::array();
  for (const auto& s : c.schedule) schedule.push_back(to_json(s));
  return {
      {"frame_rate", c.frame_rate},
      {"imu_rate", c.imu_rate},
      {"frames_per_sequence", c.frames_per_sequence},
      {"num_sequences", c.num_sequences},
      {"train_fraction", c.train_fraction},
      {"initial_speed", c.initial_speed},
      {"min_speed", c.min_speed},
      {"max_speed", c.max_speed},
      {"max_accel", c.max_accel},
      {"max_yaw_rate", c.max_yaw_rate},
      {"min_segment", c.min_segment},
      {"max_segment", c.max_segment},
      {"turn_probability", c.turn_probability},
      {"stop_probability", c.stop_probability},
      {"schedule", schedule},
      {"gravity", c.gravity},
      {"gyro_noise", c.gyro_noise},
      {"accel_noise", c.accel_noise},
      {"gyro_bias", c.gyro_bias},
      {"accel_bias", c.accel_bias},
      {"vibration_noise", c.vibration_noise},
      {"pitch_disturbance", c.pitch_disturbance},
      {"pitch_correlation", c.pitch_correlation},
      {"visual_dim", c.visual_dim},
      {"visual_snr", c.visual_snr},
  };
}

inline void from_json(const json& j, sim::MotionSegment& s, const std::string& where) {
  Reader r(j, where);
  r.get("duration", s.duration);
  r.get("end_speed", s.end_speed);
  r.get("end_curvature", s.end_curvature);
  r.finish();
}

inline void from_json(const json& j, sim::SimConfig& c, const std::string& where) {
  Reader r(j, where);
  r.get("frame_rate", c.frame_rate);
  r.get("imu_rate", c.imu_rate);
  r.get("frames_per_sequence", c.frames_per_sequence);
  r.get("num_sequences", c.num_sequences);
  r.get("train_fraction", c.train_fraction);
  r.get("initial_speed", c.initial_speed);
  r.get("min_speed", c.min_speed);
  r.get("max_speed", c.max_speed);
  r.get("max_accel", c.max_accel);
  r.get("max_yaw_rate", c.max_yaw_rate);
  r.get("min_segment", c.min_segment);
  r.get("max_segment", c.max_segment);
  r.get("turn_probability", c.turn_probability);
  r.get("stop_probability", c.stop_probability);
  if (const json* s = r.sub("schedule")) {
    if (!s->is_array()) throw ConfigError(where + ".schedule: expected an array");
    c.schedule.clear();
    for (std::size_t i = 0; i < s->size(); ++i) {
      sim::MotionSegment seg;
      from_json((*s)[i], seg, where + ".schedule[" + std::to_string(i) + "]");
      c.schedule.push_back(seg);
    }
  }
  r.get("gravity", c.gravity);
  r.get("gyro_noise", c.gyro_noise);
  r.get("accel_noise", c.accel_noise);
  r.get("gyro_bias", c.gyro_bias);
  r.get("accel_bias", c.accel_bias);
  r.get("vibration_noise", c.vibration_noise);
  r.get("pitch_disturbance", c.pitch_disturbance);
  r.get("pitch_correlation", c.pitch_correlation);
  r.get("visual_dim", c.visual_dim);
  r.get("visual_snr", c.visual_snr);
  r.finish();
}

inline json to_json(const ModelConfig& m) {
  return {
      {"visual_in", m.visual_in},
      {"visual_hidden", m.visual_hidden},
      {"visual_feat", m.visual_feat},
      {"imu_len", m.imu_len},
      {"inertial_channels", m.inertial_channels},
      {"inertial_strides", m.inertial_strides},
      {"inertial_kernel", m.inertial_kernel},
      {"inertial_feat", m.inertial_feat},
      {"hidden", m.hidden},
      {"policy_hidden", m.policy_hidden},
      {"head_hidden", m.head_hidden},
  };
}

inline void from_json(const json& j, ModelConfig& m, const std::string& where) {
  Reader r(j, where);
  r.get("visual_in", m.visual_in);
  r.get("visual_hidden", m.visual_hidden);
  r.get("visual_feat", m.visual_feat);
  r.get("imu_len", m.imu_len);
  r.get("inertial_channels", m.inertial_channels);
  r.get("inertial_strides", m.inertial_strides);
  r.get("inertial_kernel", m.inertial_kernel);
  r.get("inertial_feat", m.inertial_feat);
  r.get("hidden", m.hidden);
  r.get("policy_hidden", m.policy_hidden);
  r.get("head_hidden", m.head_hidden);
  r.finish();
}

inline json to_json(const LossConfig& l) {
  return {{"alpha", l.alpha}, {"lambda", l.lambda}, {"seq_len", l.seq_len}};
}

inline void from_json(const json& j, LossConfig& l, const std::string& where) {
  Reader r(j, where);
  r.get("alpha", l.alpha);
  r.get("lambda", l.lambda);
  r.get("seq_len", l.seq_len);
  r.finish();
}

inline json to_json(const StageSchedule& s) {
  return {{"epochs", s.epochs}, {"lr", s.lr}, {"max_batches", s.max_batches},
          {"policy_lr", s.policy_lr}};
}

inline void from_json(const json& j, StageSchedule& s, const std::string& where) {
  Reader r(j, where);
  r.get("epochs", s.epochs);
  r.get("lr", s.lr);
  r.get("max_batches", s.max_batches);
  r.get("policy_lr", s.policy_lr);
  r.finish();
}

inline json to_json(const TrainSchedule& s) {
  return {
      {"warmup", to_json(s.warmup)},
      {"joint_a", to_json(s.joint_a)},
      {"joint_b", to_json(s.joint_b)},
      {"batch_size", s.batch_size},
      {"window_stride", s.window_stride},
      {"warmup_visual_prob", s.warmup_visual_prob},
      {"clip_norm", s.clip_norm},
      {"tau0", s.tau0},
      {"tau_decay", s.tau_decay},
      {"relaxed_joint", s.relaxed_joint},
  };
}

inline void from_json(const json& j, TrainSchedule& s, const std::string& where) {
  Reader r(j, where);
  if (const json* w = r.sub("warmup")) from_json(*w, s.warmup, where + ".warmup");
  if (const json* a = r.sub("joint_a")) from_json(*a, s.joint_a, where + ".joint_a");
  if (const json* b = r.sub("joint_b")) from_json(*b, s.joint_b, where + ".joint_b");
  r.get("batch_size", s.batch_size);
  r.get("window_stride", s.window_stride);
  r.get("warmup_visual_prob", s.warmup_visual_prob);
  r.get("clip_norm", s.clip_norm);
  r.get("tau0", s.tau0);
  r.get("tau_decay", s.tau_decay);
  r.get("relaxed_joint", s.relaxed_joint);
  r.finish();
}

}  // namespace vsvio::jsonio
