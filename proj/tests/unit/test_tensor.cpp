#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "vsvio/errors.hpp"
#include "vsvio/grad_check.hpp"
#include "vsvio/tensor.hpp"

using namespace vsvio;

TEST(Tensor, MatmulMatchesTripleLoop) {
  Rng rng(1);
  auto a = vt::randn({3, 4}, rng), b = vt::randn({4, 5}, rng);
  auto c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{3, 5}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
}

TEST(Tensor, LinearIsMatmulWithTransposedWeightPlusBias) {
  Rng rng(2);
  auto x = vt::randn({2, 3}, rng), w = vt::randn({4, 3}, rng), b = vt::randn({4}, rng);
  auto y = linear(x, w, b);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t o = 0; o < 4; ++o) {
      double s = b[o];
      for (std::size_t k = 0; k < 3; ++k) s += x.at(i, k) * w.at(o, k);
      EXPECT_NEAR(y.at(i, o), s, 1e-12);
    }
}

TEST(Tensor, Conv1dIsCrossCorrelation) {
  Rng rng(3);
  const std::size_t B = 2, C = 3, O = 2, K = 3, L = 7, S = 2, P = 1;
  auto x = vt::randn({B, C, L}, rng), w = vt::randn({O, C, K}, rng), b = vt::randn({O}, rng);
  auto y = conv1d(x, w, b, S, P);
  const std::size_t Lo = (L + 2 * P - K) / S + 1;
  ASSERT_EQ(y.shape(), (Shape{B, O, Lo}));
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t t = 0; t < Lo; ++t) {
        double s = b[o];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t k = 0; k < K; ++k) {
            const long pos = static_cast<long>(t * S + k) - static_cast<long>(P);
            if (pos < 0 || pos >= static_cast<long>(L)) continue;
            s += w[(o * C + c) * K + k] * x[(n * C + c) * L + static_cast<std::size_t>(pos)];
          }
        EXPECT_NEAR(y[(n * O + o) * Lo + t], s, 1e-12);
      }
}

TEST(Tensor, ShapeErrorsNameBothShapes) {
  auto a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(a + Tensor::zeros({3, 2}), DimensionError);
  EXPECT_THROW(broadcast_to(Tensor::zeros({2, 3}), {4, 3}), DimensionError);
}

TEST(Tensor, ScalarBroadcastOnly) {
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto s = Tensor::scalar(10);
  auto c = a + s;
  EXPECT_EQ(c[3], 14);
  auto r = broadcast_to(Tensor::from({1, 2}, {5, 6}), {3, 2});
  EXPECT_EQ(r.at(2, 1), 6);
}

TEST(Tensor, BackwardTwiceIsAGraphError) {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto y = sum(x * x);
  y.backward();
  EXPECT_THROW(y.backward(), GraphError);
}

TEST(Tensor, SharedNodeGradientsAccumulate) {
  // y = x*x + x*x reuses x four times: dy/dx = 4x
  auto x = Tensor::from({3}, {1, -2, 0.5}, true);
  auto sq = x * x;
  sum(sq + sq).backward();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 4 * x[i]);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  auto x = Tensor::from({2}, {1, 2}, true);
  NoGradGuard g;
  auto y = x * x;
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, DetachStopsGradient) {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto y = sum(x.detach() * x);
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2.0);
}

TEST(Tensor, ReluDerivativeAtZeroIsZero) {
  auto x = Tensor::from({3}, {-1, 0, 2}, true);
  sum(relu(x)).backward();
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(Tensor, LogSoftmaxIsStableForLargeLogits) {
  auto x = Tensor::from({1, 2}, {1000.0, 0.0});
  auto l = log_softmax(x, 1);
  EXPECT_NEAR(l[0], 0.0, 1e-12);
  EXPECT_NEAR(l[1], -1000.0, 1e-9);
  auto s = softmax(x, 1);
  EXPECT_TRUE(std::isfinite(s[1]));
}

TEST(Tensor, StraightThroughForwardsHardAndPassesGradient) {
  auto r = Tensor::from({2}, {0.3, 0.7}, true);
  const double hard[] = {0.0, 1.0};
  auto st = straight_through(r, hard);
  EXPECT_EQ(st[0], 0.0);
  EXPECT_EQ(st[1], 1.0);
  auto w = Tensor::from({2}, {2.0, 5.0});
  sum(st * w).backward();
  EXPECT_DOUBLE_EQ(r.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(r.grad()[1], 5.0);
}

TEST(Tensor, ReduceAxisAndSlices) {
  auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto s0 = reduce(ReduceKind::kSum, x, 0);
  EXPECT_EQ(s0.shape(), (Shape{3}));
  EXPECT_EQ(s0[2], 9);
  auto m1 = reduce(ReduceKind::kMean, x, 1);
  EXPECT_DOUBLE_EQ(m1[1], 5.0);
  auto sl = slice(x, 1, 1, 3);
  EXPECT_EQ(sl.shape(), (Shape{2, 2}));
  EXPECT_EQ(sl.at(1, 0), 5);
  auto c = concat(x, x, 0);
  EXPECT_EQ(c.shape(), (Shape{4, 3}));
  EXPECT_EQ(reshape(x, {3, 2}).at(2, 1), 6);
}

// Every differentiable op against central differences.
TEST(Tensor, GradCheckEveryOp) {
  Rng rng(7);
  auto pos = [&](Shape s) {
    auto t = vt::randn(s, rng);
    for (auto& v : t.mutable_data()) v = 0.5 + std::abs(v);
    return t;
  };
  auto a = vt::randn({3, 4}, rng);
  auto b = vt::randn({3, 4}, rng);
  auto w = vt::randn({5, 4}, rng);
  auto m = vt::randn({4, 2}, rng);
  auto check = [](const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
    EXPECT_LT(grad_check(f, x), 1e-6);
  };
  check([](const Tensor& x) { return sum(tanh(x)); }, a);
  check([](const Tensor& x) { return sum(sigmoid(x)); }, a);
  check([](const Tensor& x) { return sum(exp(x * 0.3)); }, a);
  check([](const Tensor& x) { return sum(log(x)); }, pos({3, 4}));
  check([&](const Tensor& x) { return sum(x * b - x / (b * b + 1.0)); }, a);
  check([&](const Tensor& x) { return sum(b / x); }, pos({3, 4}));
  check([&](const Tensor& x) { return sum(tanh(matmul(x, m))); }, a);
  check([&](const Tensor& x) { return sum(tanh(matmul(a, x))); }, m);
  check([&](const Tensor& x) { return sum(tanh(linear(a, x))); }, w);
  check([&](const Tensor& x) { return sum(tanh(linear(x, w, Tensor::zeros({5})))); }, a);
  check([](const Tensor& x) { return mean(reduce(ReduceKind::kSum, x * x, 1)); }, a);
  check([](const Tensor& x) { return sum(log_softmax(x, 1) * log_softmax(x, 1)); }, a);
  check([](const Tensor& x) { return sum(softmax(x, 0) * softmax(x, 0)); }, a);
  check([&](const Tensor& x) { return sum(tanh(concat(x, b, 1))); }, a);
  check([](const Tensor& x) { return sum(tanh(slice(x, 1, 1, 3))); }, a);
  check([](const Tensor& x) { return sum(tanh(reshape(x, {2, 6}))); }, a);
  check([](const Tensor& x) { return sum(tanh(broadcast_to(x, {4, 4}))); }, vt::randn({1, 4}, rng));
  check([](const Tensor& x) { return sum(relu(x + 0.1)); }, a);
  auto cx = vt::randn({2, 3, 9}, rng), cw = vt::randn({4, 3, 3}, rng), cb = vt::randn({4}, rng);
  check([&](const Tensor& x) { return sum(tanh(conv1d(x, cw, cb, 2, 1))); }, cx);
  check([&](const Tensor& x) { return sum(tanh(conv1d(cx, x, cb, 1, 0))); }, cw);
  check([&](const Tensor& x) { return sum(tanh(conv1d(cx, cw, x, 2, 0))); }, cb);
}

TEST(Tensor, DumpGraphListsEdges) {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto y = sum(x * x);
  EXPECT_NE(y.dump_graph().find("->"), std::string::npos);
}
