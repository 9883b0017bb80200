#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vsvio/random.hpp"
#include "vsvio/tensor.hpp"

namespace vsvio::nn {

/// Ordered (name, parameter) pairs. Tensors are shared handles, so copies of
/// the list alias the same storage.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

// FLOP conventions: one multiply-accumulate = 2 FLOPs, bias adds count once
// per output element, ReLU is free.
std::uint64_t linear_flops(std::size_t in, std::size_t out);
std::uint64_t conv1d_flops(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                           std::size_t out_len);
/// 2*4H*(in+H) for the two gate products plus 13H pointwise terms
/// (4H bias, 4H gate nonlinearity, 5H state update).
std::uint64_t lstm_flops(std::size_t in, std::size_t hidden);

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out);

  /// x [batch x in] -> [batch x out]
  Tensor forward(const Tensor& x) const;
  /// Xavier-uniform weight, zero bias.
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
  std::uint64_t flops() const { return linear_flops(in_, out_); }
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride = 1,
         std::size_t padding = 0);

  /// x [batch x in_ch x len] -> [batch x out_ch x out_length(len)]
  Tensor forward(const Tensor& x) const;
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
  std::size_t out_length(std::size_t len) const;
  std::uint64_t flops(std::size_t len) const;
  std::size_t in_channels() const { return in_ch_; }
  std::size_t out_channels() const { return out_ch_; }

  Tensor weight;  // [out_ch x in_ch x kernel]
  Tensor bias;    // [out_ch]

 private:
  std::size_t in_ch_ = 0;
  std::size_t out_ch_ = 0;
  std::size_t kernel_ = 0;
  std::size_t stride_ = 1;
  std::size_t padding_ = 0;
};

struct LstmState {
  Tensor h;  // [batch x H]
  Tensor c;  // [batch x H]
};

/// Single LSTM cell. Gate rows are stacked in the order (i, f, g, o):
///   i = sigmoid, f = sigmoid, g = tanh, o = sigmoid
///   c' = f*c + i*g,  h' = o*tanh(c')
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(std::size_t in, std::size_t hidden);

  LstmState step(const Tensor& x, const LstmState& prev) const;
  LstmState zero_state(std::size_t batch) const;
  /// Xavier-uniform input weights (per-gate fan), uniform +-1/sqrt(H)
  /// recurrent weights, zero bias except forget gate = 1.
  void init(Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
  std::uint64_t flops() const { return lstm_flops(in_, hidden_); }
  std::size_t hidden() const { return hidden_; }
  std::size_t input_size() const { return in_; }

  Tensor w_ih;  // [4H x in]
  Tensor w_hh;  // [4H x H]
  Tensor bias;  // [4H]

 private:
  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
};

// ---------------------------------------------------------------------------
// Optimization

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Parameters without a gradient buffer are skipped.
class Adam {
 public:
  Adam(ParamList params, AdamOptions options = {});

  /// theta <- theta - lr * m_hat / (sqrt(u_hat) + eps). Raises DomainError
  /// naming the parameter if any gradient is not finite.
  void step();
  void zero_grad();
  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::int64_t steps() const { return step_; }
  const ParamList& params() const { return params_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return u_[i]; }

 private:
  ParamList params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> u_;
  std::int64_t step_ = 0;
};

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const ParamList& params, double max_norm);

}  // namespace vsvio::nn
