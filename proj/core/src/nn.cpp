#include "vsvio/nn.hpp"

#include <cmath>

#include "vsvio/errors.hpp"

namespace vsvio::nn {

namespace {

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
}

}  // namespace

std::uint64_t linear_flops(std::size_t in, std::size_t out) { return 2ull * in * out + out; }

std::uint64_t conv1d_flops(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                           std::size_t out_len) {
  return 2ull * out_ch * in_ch * kernel * out_len + out_ch * out_len;
}

std::uint64_t lstm_flops(std::size_t in, std::size_t hidden) {
  return 2ull * 4 * hidden * (in + hidden) + 13ull * hidden;
}

// ---------------------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out)
    : weight(Tensor::zeros({out, in}, true)), bias(Tensor::zeros({out}, true)), in_(in), out_(out) {}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight, bias); }

void Linear::init(Rng& rng) {
  fill_uniform(weight, rng, std::sqrt(6.0 / static_cast<double>(in_ + out_)));
  for (double& v : bias.mutable_data()) v = 0.0;
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + "weight", weight);
  out.emplace_back(prefix + "bias", bias);
}

Conv1d::Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
               std::size_t padding)
    : weight(Tensor::zeros({out_ch, in_ch, kernel}, true)),
      bias(Tensor::zeros({out_ch}, true)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
  if (stride == 0) throw ConfigError("conv1d stride must be positive");
}

Tensor Conv1d::forward(const Tensor& x) const { return conv1d(x, weight, bias, stride_, padding_); }

void Conv1d::init(Rng& rng) {
  const double fan = static_cast<double>((in_ch_ + out_ch_) * kernel_);
  fill_uniform(weight, rng, std::sqrt(6.0 / fan));
  for (double& v : bias.mutable_data()) v = 0.0;
}

void Conv1d::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + "weight", weight);
  out.emplace_back(prefix + "bias", bias);
}

std::size_t Conv1d::out_length(std::size_t len) const {
  if (len + 2 * padding_ < kernel_) {
    throw DimensionError("conv1d: input length " + std::to_string(len) +
                         " shorter than kernel after padding");
  }
  return (len + 2 * padding_ - kernel_) / stride_ + 1;
}

std::uint64_t Conv1d::flops(std::size_t len) const {
  return conv1d_flops(in_ch_, out_ch_, kernel_, out_length(len));
}

LstmCell::LstmCell(std::size_t in, std::size_t hidden)
    : w_ih(Tensor::zeros({4 * hidden, in}, true)),
      w_hh(Tensor::zeros({4 * hidden, hidden}, true)),
      bias(Tensor::zeros({4 * hidden}, true)),
      in_(in),
      hidden_(hidden) {}

LstmState LstmCell::step(const Tensor& x, const LstmState& prev) const {
  const std::size_t batch = x.dim(0);
  if (prev.h.shape() != Shape{batch, hidden_} || prev.c.shape() != Shape{batch, hidden_}) {
    throw DimensionError("lstm_step: state " + shape_string(prev.h.shape()) + "/" +
                         shape_string(prev.c.shape()) + " does not match [" +
                         std::to_string(batch) + "x" + std::to_string(hidden_) + "]");
  }
  const Tensor gates = linear(x, w_ih, bias) + linear(prev.h, w_hh);
  const std::size_t h = hidden_;
  const Tensor i = sigmoid(slice(gates, 1, 0, h));
  const Tensor f = sigmoid(slice(gates, 1, h, 2 * h));
  const Tensor g = tanh(slice(gates, 1, 2 * h, 3 * h));
  const Tensor o = sigmoid(slice(gates, 1, 3 * h, 4 * h));
  Tensor c = f * prev.c + i * g;
  Tensor hn = o * tanh(c);
  return {std::move(hn), std::move(c)};
}

LstmState LstmCell::zero_state(std::size_t batch) const {
  return {Tensor::zeros({batch, hidden_}), Tensor::zeros({batch, hidden_})};
}

void LstmCell::init(Rng& rng) {
  fill_uniform(w_ih, rng, std::sqrt(6.0 / static_cast<double>(in_ + hidden_)));
  fill_uniform(w_hh, rng, 1.0 / std::sqrt(static_cast<double>(hidden_)));
  auto b = bias.mutable_data();
  for (std::size_t k = 0; k < b.size(); ++k) b[k] = (k >= hidden_ && k < 2 * hidden_) ? 1.0 : 0.0;
}

void LstmCell::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + "w_ih", w_ih);
  out.emplace_back(prefix + "w_hh", w_hh);
  out.emplace_back(prefix + "bias", bias);
}

// ---------------------------------------------------------------------------

Adam::Adam(ParamList params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.numel(), 0.0);
    u_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  for (const auto& [name, p] : params_) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw DomainError("non-finite gradient in parameter '" + name + "'");
    }
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = params_[k].second;
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto theta = p.mutable_data();
    auto& m = m_[k];
    auto& u = u_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      u[i] = b2 * u[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double u_hat = u[i] / c2;
      theta[i] -= options_.lr * m_hat / (std::sqrt(u_hat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto [name, p] : params)
      for (double& g : p.mutable_grad()) g *= scale;
  }
  return norm;
}

}  // namespace vsvio::nn
