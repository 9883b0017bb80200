#include "vsvio/model.hpp"

#include <cmath>
#include <cstdlib>

#include "vsvio/errors.hpp"
#include "vsvio/gumbel.hpp"

namespace vsvio {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string("model: ") + what + " must be positive");
  };
  positive(visual_in, "visual_in");
  positive(visual_feat, "visual_feat");
  positive(imu_len, "imu_len");
  positive(inertial_kernel, "inertial_kernel");
  positive(inertial_feat, "inertial_feat");
  positive(hidden, "hidden");
  positive(head_hidden, "head_hidden");
  for (auto w : visual_hidden) positive(w, "visual_hidden entry");
  for (auto w : policy_hidden) positive(w, "policy_hidden entry");
  for (auto w : inertial_channels) positive(w, "inertial_channels entry");
  for (auto s : inertial_strides) positive(s, "inertial_strides entry");
  if (inertial_channels.size() != inertial_strides.size() || inertial_channels.empty()) {
    throw ConfigError("model: inertial_channels and inertial_strides must be non-empty and equal length");
  }
  if (policy_hidden.size() != 2) {
    throw ConfigError("model: policy_hidden must list exactly two widths");
  }
}

double gated_flops(double fixed, double visual, double usage) { return fixed + usage * visual; }

// ---------------------------------------------------------------------------

Tensor VisualEncoder::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    h = layers[k].forward(h);
    if (k + 1 < layers.size()) h = relu(h);
  }
  return h;
}

std::uint64_t VisualEncoder::flops() const {
  std::uint64_t f = 0;
  for (const auto& l : layers) f += l.flops();
  return f;
}

Tensor InertialEncoder::forward(const Tensor& imu) const {
  if (imu.rank() != 3 || imu.dim(1) != kImuChannels || imu.dim(2) != imu_len) {
    throw DimensionError("encode_inertial: expected [batch x 6 x " + std::to_string(imu_len) +
                         "], got " + shape_string(imu.shape()));
  }
  Tensor h = imu;
  for (const auto& c : convs) h = relu(c.forward(h));
  const std::size_t batch = h.dim(0);
  h = reshape(h, {batch, h.dim(1) * h.dim(2)});
  return fc.forward(h);
}

std::uint64_t InertialEncoder::flops() const {
  std::uint64_t f = 0;
  std::size_t len = imu_len;
  for (const auto& c : convs) {
    f += c.flops(len);
    len = c.out_length(len);
  }
  return f + fc.flops();
}

Tensor PolicyNet::logits(const Tensor& h_prev, const Tensor& x_i) const {
  Tensor h = concat(h_prev, x_i, 1);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    h = layers[k].forward(h);
    if (k + 1 < layers.size()) h = relu(h);
  }
  return h;
}

std::uint64_t PolicyNet::flops() const {
  std::uint64_t f = 0;
  for (const auto& l : layers) f += l.flops();
  return f;
}

PoseStep PoseRnn::step(const Tensor& z, const RnnState& prev) const {
  RnnState s;
  s.l1 = lstm1.step(z, prev.l1);
  s.l2 = lstm2.step(s.l1.h, prev.l2);
  Tensor pose = head2.forward(relu(head1.forward(s.l2.h)));
  if (pose_scale.defined()) pose = pose * broadcast_to(pose_scale, pose.shape());
  return {std::move(s), std::move(pose)};
}

RnnState PoseRnn::zero_state(std::size_t batch) const {
  return {lstm1.zero_state(batch), lstm2.zero_state(batch)};
}

std::uint64_t PoseRnn::flops() const {
  return lstm1.flops() + lstm2.flops() + head1.flops() + head2.flops();
}

// ---------------------------------------------------------------------------

VioModel::VioModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;

  std::size_t in = c.visual_in;
  for (auto w : c.visual_hidden) {
    visual_.layers.emplace_back(in, w);
    in = w;
  }
  visual_.layers.emplace_back(in, c.visual_feat);

  std::size_t ch = kImuChannels;
  std::size_t len = c.imu_len;
  const std::size_t pad = c.inertial_kernel / 2;
  for (std::size_t k = 0; k < c.inertial_channels.size(); ++k) {
    inertial_.convs.emplace_back(ch, c.inertial_channels[k], c.inertial_kernel,
                                 c.inertial_strides[k], pad);
    len = inertial_.convs.back().out_length(len);
    ch = c.inertial_channels[k];
  }
  inertial_.fc = nn::Linear(ch * len, c.inertial_feat);
  inertial_.imu_len = c.imu_len;

  policy_.layers.emplace_back(c.hidden + c.inertial_feat, c.policy_hidden[0]);
  policy_.layers.emplace_back(c.policy_hidden[0], c.policy_hidden[1]);
  policy_.layers.emplace_back(c.policy_hidden[1], 2);

  rnn_.lstm1 = nn::LstmCell(c.fused_dim(), c.hidden);
  rnn_.lstm2 = nn::LstmCell(c.hidden, c.hidden);
  rnn_.head1 = nn::Linear(c.hidden, c.head_hidden);
  rnn_.head2 = nn::Linear(c.head_hidden, kPoseDim);
}

void VioModel::set_norm(const InputNorm& n) {
  norm_ = n;
  rnn_.pose_scale = Tensor::from({1, kPoseDim}, {n.pose_scale.begin(), n.pose_scale.end()});
}

void VioModel::init(Rng& rng) {
  for (auto& l : visual_.layers) l.init(rng);
  for (auto& cv : inertial_.convs) cv.init(rng);
  inertial_.fc.init(rng);
  for (auto& l : policy_.layers) l.init(rng);
  rnn_.lstm1.init(rng);
  rnn_.lstm2.init(rng);
  rnn_.head1.init(rng);
  rnn_.head2.init(rng);
}

nn::ParamList VioModel::pose_parameters() const {
  nn::ParamList out;
  for (std::size_t k = 0; k < visual_.layers.size(); ++k)
    visual_.layers[k].collect(out, "visual." + std::to_string(k) + ".");
  for (std::size_t k = 0; k < inertial_.convs.size(); ++k)
    inertial_.convs[k].collect(out, "inertial.conv" + std::to_string(k) + ".");
  inertial_.fc.collect(out, "inertial.fc.");
  rnn_.lstm1.collect(out, "rnn.lstm1.");
  rnn_.lstm2.collect(out, "rnn.lstm2.");
  rnn_.head1.collect(out, "rnn.head1.");
  rnn_.head2.collect(out, "rnn.head2.");
  return out;
}

nn::ParamList VioModel::policy_parameters() const {
  nn::ParamList out;
  for (std::size_t k = 0; k < policy_.layers.size(); ++k)
    policy_.layers[k].collect(out, "policy." + std::to_string(k) + ".");
  return out;
}

nn::ParamList VioModel::parameters() const {
  nn::ParamList out = pose_parameters();
  for (auto& p : policy_parameters()) out.push_back(std::move(p));
  return out;
}

Tensor VioModel::encode_inertial(const Tensor& imu) const { return inertial_.forward(imu); }

Tensor VioModel::encode_visual(const Tensor& visual) const {
  if (visual.rank() != 2 || visual.dim(1) != config_.visual_in) {
    throw DimensionError("encode_visual: expected [batch x " + std::to_string(config_.visual_in) +
                         "], got " + shape_string(visual.shape()));
  }
  return visual_.forward(visual);
}

Tensor VioModel::policy_logits(const Tensor& h_prev, const Tensor& x_i) const {
  return policy_.logits(h_prev, x_i);
}

Tensor VioModel::fuse(const std::optional<Tensor>& x_v, const Tensor& x_i, bool d) const {
  if (d) {
    if (!x_v || !x_v->defined()) throw DimensionError("fuse: d = 1 requires a visual feature");
    return concat(*x_v, x_i, 1);
  }
  return concat(Tensor::zeros({x_i.dim(0), config_.visual_feat}), x_i, 1);
}

PoseStep VioModel::rnn_pose_step(const Tensor& z, const RnnState& prev) const {
  return rnn_.step(z, prev);
}

Tensor VioModel::make_visual(std::span<const StepInput> steps) const {
  const std::size_t d = config_.visual_in;
  std::vector<double> buf(steps.size() * d);
  for (std::size_t b = 0; b < steps.size(); ++b) {
    if (steps[b].visual.size() != d) {
      throw DimensionError("visual input has " + std::to_string(steps[b].visual.size()) +
                           " values, expected " + std::to_string(d));
    }
    for (std::size_t k = 0; k < d; ++k) buf[b * d + k] = steps[b].visual[k] * norm_.visual_scale;
  }
  return Tensor::from({steps.size(), d}, std::move(buf));
}

Tensor VioModel::make_imu(std::span<const StepInput> steps) const {
  const std::size_t len = config_.imu_len;
  const std::size_t n = kImuChannels * len;
  std::vector<double> buf(steps.size() * n);
  for (std::size_t b = 0; b < steps.size(); ++b) {
    if (steps[b].imu.size() != n) {
      throw DimensionError("IMU window has " + std::to_string(steps[b].imu.size()) +
                           " values, expected 6 x " + std::to_string(len));
    }
    for (std::size_t c = 0; c < kImuChannels; ++c)
      for (std::size_t k = 0; k < len; ++k)
        buf[b * n + c * len + k] =
            (steps[b].imu[c * len + k] - norm_.imu_mean[c]) * norm_.imu_scale[c];
  }
  return Tensor::from({steps.size(), kImuChannels, len}, std::move(buf));
}

FlopTable VioModel::count_flops() const {
  return {visual_.flops(), inertial_.flops(), policy_.flops(), rnn_.flops()};
}

// ---------------------------------------------------------------------------

PolicyMode PolicyMode::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("bernoulli policy: p must be in [0, 1]");
  return {Kind::kBernoulli, p, 1};
}

PolicyMode PolicyMode::regular(int n) {
  if (n < 1) throw ConfigError("regular policy: n must be >= 1, got " + std::to_string(n));
  return {Kind::kRegular, 1.0 / n, n};
}

PolicyMode PolicyMode::parse(const std::string& text) {
  if (text == "learned") return learned();
  if (text == "always") return always();
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  char* end = nullptr;
  if (kind == "bernoulli" && !arg.empty()) {
    const double p = std::strtod(arg.c_str(), &end);
    if (*end == '\0') return bernoulli(p);
  } else if (kind == "regular" && !arg.empty()) {
    const long n = std::strtol(arg.c_str(), &end, 10);
    if (*end == '\0') return regular(static_cast<int>(n));
  }
  throw ConfigError("unknown policy mode '" + text +
                    "' (expected learned | bernoulli:<p> | regular:<n> | always)");
}

std::string PolicyMode::to_string() const {
  switch (kind) {
    case Kind::kLearned:
      return "learned";
    case Kind::kAlways:
      return "always";
    case Kind::kRegular:
      return "regular:" + std::to_string(n);
    case Kind::kBernoulli: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "bernoulli:%g", p);
      return buf;
    }
  }
  return "?";
}

std::uint64_t predicted_rollout_flops(const FlopTable& table, std::span<const int> decisions,
                                      const PolicyMode& mode) {
  std::uint64_t total = 0;
  for (std::size_t t = 0; t < decisions.size(); ++t) {
    total += table.fixed();
    if (decisions[t]) total += table.visual;
    if (mode.kind == PolicyMode::Kind::kLearned && t > 0) total += table.policy;
  }
  return total;
}

RolloutResult rollout(const VioModel& model, std::span<const StepInput> steps,
                      const PolicyMode& mode, Rng& rng, const RolloutOptions& options) {
  if (steps.empty()) throw DimensionError("rollout: empty sequence");
  if (mode.kind == PolicyMode::Kind::kRegular && mode.n < 1) {
    throw ConfigError("regular policy: n must be >= 1");
  }
  NoGradGuard no_grad;
  const FlopTable table = model.count_flops();
  RolloutResult out;
  out.decisions.reserve(steps.size());
  out.p_visual.reserve(steps.size());
  out.poses.reserve(steps.size());
  RnnState state = model.zero_state(1);

  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto one = steps.subspan(t, 1);
    const Tensor x_i = model.encode_inertial(model.make_imu(one));
    out.flops += table.fixed();

    int d = 1;
    double p = 1.0;
    if (t > 0) {
      switch (mode.kind) {
        case PolicyMode::Kind::kAlways:
          break;
        case PolicyMode::Kind::kRegular:
          d = (t % static_cast<std::size_t>(mode.n)) == 0 ? 1 : 0;
          p = d;
          break;
        case PolicyMode::Kind::kBernoulli:
          p = mode.p;
          d = rng.bernoulli(p) ? 1 : 0;
          break;
        case PolicyMode::Kind::kLearned: {
          const Tensor probs = softmax(model.policy_logits(state.l2.h, x_i), 1);
          out.flops += table.policy;
          p = probs[0];
          d = rng.bernoulli(p) ? 1 : 0;
          break;
        }
      }
    }

    std::optional<Tensor> x_v;
    if (d) {
      x_v = model.encode_visual(model.make_visual(one));
      out.flops += table.visual;
    }
    PoseStep ps = model.rnn_pose_step(model.fuse(x_v, x_i, d != 0), state);
    state = std::move(ps.state);

    const auto v = ps.pose.data();
    geo::RelPose rel;
    rel.phi = {v[0], v[1], v[2]};
    rel.v = {v[3], v[4], v[5]};
    out.poses.push_back(rel);
    out.decisions.push_back(d);
    out.p_visual.push_back(p);
    if (options.keep_hidden) {
      const auto h = state.l2.h.data();
      out.hidden.emplace_back(h.begin(), h.end());
    }
  }
  std::size_t on = 0;
  for (int d : out.decisions) on += static_cast<std::size_t>(d);
  out.usage = static_cast<double>(on) / static_cast<double>(out.decisions.size());
  return out;
}

// ---------------------------------------------------------------------------

TrainForward train_forward(const VioModel& model, std::span<const TrainStep> steps,
                           TrainGating gating, double p_random, double tau, Rng& rng) {
  if (steps.empty()) throw DimensionError("train_forward: empty sequence");
  const std::size_t batch = steps[0].visual.dim(0);
  const std::size_t fv = model.config().visual_feat;
  TrainForward out;
  RnnState state = model.zero_state(batch);

  for (std::size_t t = 0; t < steps.size(); ++t) {
    const Tensor x_i = model.encode_inertial(steps[t].imu);
    const Tensor x_v = model.encode_visual(steps[t].visual);

    Tensor gate;
    std::vector<int> hard(batch, 1);
    if (t == 0) {
      gate = Tensor::full({batch, 1}, 1.0);
    } else if (gating == TrainGating::kRandom) {
      std::vector<double> g(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        hard[b] = rng.bernoulli(p_random) ? 1 : 0;
        g[b] = hard[b];
      }
      gate = Tensor::from({batch, 1}, std::move(g));
    } else {
      const Tensor log_p = log_softmax(model.policy_logits(state.l2.h, x_i), 1);
      gumbel::DecisionSample s = gumbel::straight_through_decision(log_p, tau, rng);
      gate = slice(gating == TrainGating::kRelaxed ? s.relaxed : s.straight_through, 1, 0, 1);
      for (std::size_t b = 0; b < batch; ++b) hard[b] = s.index[b] == 0 ? 1 : 0;
    }

    const Tensor z = concat(x_v * broadcast_to(gate, {batch, fv}), x_i, 1);
    PoseStep ps = model.rnn_pose_step(z, state);
    state = std::move(ps.state);
    out.poses.push_back(std::move(ps.pose));
    out.gates.push_back(std::move(gate));
    out.decisions.push_back(std::move(hard));
  }
  return out;
}

}  // namespace vsvio
