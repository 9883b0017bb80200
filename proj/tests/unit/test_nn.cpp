#include <gtest/gtest.h>

#include <limits>

#include <cmath>

#include "helpers.hpp"
#include "vsvio/errors.hpp"
#include "vsvio/grad_check.hpp"
#include "vsvio/nn.hpp"

using namespace vsvio;

namespace {
double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

TEST(Flops, ConventionsByHand) {
  EXPECT_EQ(nn::linear_flops(64, 256), 2u * 64 * 256 + 256);
  // conv: per output element C*K MACs plus one bias add
  EXPECT_EQ(nn::conv1d_flops(6, 8, 3, 5), 2u * 8 * 6 * 3 * 5 + 8 * 5);
  EXPECT_EQ(nn::lstm_flops(96, 64), 2u * 4 * 64 * (96 + 64) + 13 * 64);
}

TEST(Lstm, OneStepMatchesScalarFormulas) {
  Rng rng(4);
  nn::LstmCell cell(2, 1);
  cell.init(rng);
  // forget bias starts at 1, everything else at 0
  EXPECT_EQ(cell.bias[1], 1.0);
  EXPECT_EQ(cell.bias[0], 0.0);
  auto x = Tensor::from({1, 2}, {0.4, -0.7});
  nn::LstmState prev{Tensor::from({1, 1}, {0.2}), Tensor::from({1, 1}, {-0.5})};
  auto next = cell.step(x, prev);
  auto gate = [&](int k) {
    return cell.w_ih[k * 2] * 0.4 + cell.w_ih[k * 2 + 1] * -0.7 + cell.w_hh[k] * 0.2 + cell.bias[k];
  };
  const double i = sig(gate(0)), f = sig(gate(1)), g = std::tanh(gate(2)), o = sig(gate(3));
  const double c = f * -0.5 + i * g;
  EXPECT_NEAR(next.c[0], c, 1e-14);
  EXPECT_NEAR(next.h[0], o * std::tanh(c), 1e-14);
}

TEST(Lstm, GradCheckThroughTwoSteps) {
  Rng rng(5);
  nn::LstmCell cell(3, 4);
  cell.init(rng);
  auto x1 = vt::randn({2, 3}, rng), x2 = vt::randn({2, 3}, rng);
  std::vector<Tensor> ps = {cell.w_ih, cell.w_hh, cell.bias};
  for (auto& p : ps) p.set_requires_grad(true);
  auto f = [&] {
    auto s = cell.step(x1, cell.zero_state(2));
    s = cell.step(x2, s);
    return sum(s.h * s.h) + sum(s.c);
  };
  EXPECT_LT(grad_check(f, ps), 1e-6);
}

TEST(Linear, XavierBoundsAndZeroBias) {
  Rng rng(6);
  nn::Linear l(100, 50);
  l.init(rng);
  const double bound = std::sqrt(6.0 / 150.0);
  double mx = 0;
  for (double w : l.weight.data()) mx = std::max(mx, std::abs(w));
  EXPECT_LE(mx, bound);
  EXPECT_GT(mx, 0.9 * bound);
  for (double b : l.bias.data()) EXPECT_EQ(b, 0.0);
}

TEST(Conv1d, OutputLengthAndFlops) {
  nn::Conv1d c(6, 8, 3, 2, 0);
  EXPECT_EQ(c.out_length(11), 5u);
  EXPECT_EQ(c.flops(11), nn::conv1d_flops(6, 8, 3, 5));
}

// Reference Adam on one scalar, written out from the update rule.
TEST(Adam, MatchesReferenceUpdate) {
  auto p = Tensor::from({1}, {1.0}, true);
  nn::Adam opt({{"p", p}}, {0.1, 0.9, 0.999, 1e-8});
  double theta = 1.0, m = 0, u = 0;
  for (int t = 1; t <= 5; ++t) {
    opt.zero_grad();
    sum(p * p * 3.0).backward();  // grad = 6 theta
    opt.step();
    const double g = 6 * theta;
    m = 0.9 * m + 0.1 * g;
    u = 0.999 * u + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), uh = u / (1 - std::pow(0.999, t));
    theta -= 0.1 * mh / (std::sqrt(uh) + 1e-8);
    EXPECT_NEAR(p[0], theta, 1e-13) << "step " << t;
  }
}

TEST(Adam, RejectsNonFiniteGradient) {
  auto p = Tensor::from({1}, {0.0}, true);
  nn::Adam opt({{"weird", p}});
  sum(p * Tensor::from({1}, {std::numeric_limits<double>::infinity()})).backward();
  try {
    opt.step();
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("weird"), std::string::npos);
  }
}

TEST(ClipGradNorm, ScalesToMaxNorm) {
  auto a = Tensor::from({2}, {0, 0}, true), b = Tensor::from({1}, {0}, true);
  sum(a * Tensor::from({2}, {3, 4})).backward();
  sum(b * 12.0).backward();
  const double before = nn::clip_grad_norm({{"a", a}, {"b", b}}, 6.5);
  EXPECT_DOUBLE_EQ(before, 13.0);
  EXPECT_NEAR(a.grad()[0], 1.5, 1e-14);
  EXPECT_NEAR(a.grad()[1], 2.0, 1e-14);
  EXPECT_NEAR(b.grad()[0], 6.0, 1e-14);
  // below the threshold nothing changes
  EXPECT_NEAR(nn::clip_grad_norm({{"a", a}, {"b", b}}, 100.0), 6.5, 1e-12);
  EXPECT_NEAR(b.grad()[0], 6.0, 1e-14);
}
