// awe/tests/test_tensorkit.cpp

// Copyright 2026  The awe-qbe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include "awe/tensorkit.hpp"
#include "test_support.hpp"

namespace awe::tk {
namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data) v = u(rng);
  return t;
}

// Direct nested-loop cross-correlation used as the reference.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Conv2dGeometry& geo) {
  const std::size_t B = x.dim(0), C = x.dim(1), F = x.dim(2), T = x.dim(3);
  const std::size_t O = w.dim(0), kF = w.dim(2), kT = w.dim(3);
  const std::size_t Fo = (F + 2 * geo.pad_f - kF) / geo.stride_f + 1;
  const std::size_t To = (T + 2 * geo.pad_t - kT) / geo.stride_t + 1;
  Tensor<double> y(Shape{B, O, Fo, To});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t fo = 0; fo < Fo; ++fo)
        for (std::size_t to = 0; to < To; ++to) {
          double acc = 0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < kF; ++i)
              for (std::size_t j = 0; j < kT; ++j) {
                const long f = static_cast<long>(fo * geo.stride_f + i) - static_cast<long>(geo.pad_f);
                const long t = static_cast<long>(to * geo.stride_t + j) - static_cast<long>(geo.pad_t);
                if (f < 0 || t < 0 || f >= static_cast<long>(F) || t >= static_cast<long>(T)) continue;
                acc += x.at(b, c, static_cast<std::size_t>(f), static_cast<std::size_t>(t)) * w.at(o, c, i, j);
              }
          y.at(b, o, fo, to) = acc;
        }
  return y;
}

// Mean of y * sin(0.37 i), so every output position carries a distinct gradient.
NodeId weighted_sum(Graph<double>& g, NodeId y) {
  const Tensor<double>& v = g.value(y);
  Tensor<double> w(v.shape);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.37 * static_cast<double>(i) + 0.1);
  Tensor<double> prod(v.shape);
  for (std::size_t i = 0; i < v.size(); ++i) prod[i] = v[i] * w[i];
  const NodeId p = g.record(std::move(prod), {y}, [y, w](Graph<double>& gr, const Tensor<double>& gout) {
    auto& gy = gr.grad_mut(y);
    for (std::size_t i = 0; i < gout.size(); ++i) gy[i] += gout[i] * w[i];
  });
  return mean(g, p);
}

Tensor<double> run_conv(const Tensor<double>& x, const Tensor<double>& w, const Conv2dGeometry& geo) {
  Graph<double> g(false);
  return g.value(conv2d(g, g.constant(x), g.constant(w), kNoNode, geo).node);
}

// ----------------------------------------------------------------- conv2d

TEST(Conv2d, IdentityKernelReproducesInput) {
  std::mt19937_64 rng(1);
  const auto x = random_tensor({2, 1, 3, 5}, rng);
  EXPECT_EQ(run_conv(x, Tensor<double>({1, 1, 1, 1}, 1.0), {}), x);
}

TEST(Conv2d, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(2);
  const auto y = run_conv(Tensor<double>({1, 2, 4, 4}), random_tensor({3, 2, 3, 3}, rng), {1, 1, 1, 1});
  for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, Stride2KernelMatchesLoopOracle) {
  std::mt19937_64 rng(3);
  const auto x = random_tensor({1, 1, 4, 4}, rng);
  const auto w = random_tensor({1, 1, 2, 2}, rng);
  const auto y = run_conv(x, w, {2, 2, 0, 0});
  const auto ref = conv_oracle(x, w, {2, 2, 0, 0});
  ASSERT_EQ(y.shape, (Shape{1, 1, 2, 2}));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-6);
}

TEST(Conv2d, RandomShapesUpTo8MatchLoopOracle) {
  std::mt19937_64 rng(4);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t kF = pick(1, 4), kT = pick(1, 4);
    Conv2dGeometry geo{pick(1, 3), pick(1, 3), pick(0, 2), pick(0, 2)};
    const std::size_t F = pick(std::max<std::size_t>(1, kF > 2 * geo.pad_f ? kF - 2 * geo.pad_f : 1), 8);
    const std::size_t T = pick(std::max<std::size_t>(1, kT > 2 * geo.pad_t ? kT - 2 * geo.pad_t : 1), 8);
    const auto x = random_tensor({pick(1, 3), pick(1, 4), F, T}, rng);
    const auto w = random_tensor({pick(1, 4), x.dim(1), kF, kT}, rng);
    const auto y = run_conv(x, w, geo);
    const auto ref = conv_oracle(x, w, geo);
    ASSERT_EQ(y.shape, ref.shape);
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-9) << "trial " << trial;
  }
}

TEST(Conv2d, ShapeErrorListsBothShapes) {
  try {
    run_conv(Tensor<double>({1, 2, 4, 4}), Tensor<double>({1, 3, 2, 2}), {});
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1,2,4,4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[1,3,2,2]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, MaskedItemMatchesSoloForward) {
  std::mt19937_64 rng(5);
  const auto w = random_tensor({2, 1, 3, 3}, rng);
  auto solo = random_tensor({1, 1, 5, 4}, rng);
  Tensor<double> padded({2, 1, 5, 9}, 7.0);  // padding garbage must not leak in
  for (std::size_t f = 0; f < 5; ++f)
    for (std::size_t t = 0; t < 4; ++t) padded.at(0, 0, f, t) = solo.at(0, 0, f, t);
  const Conv2dGeometry geo{2, 2, 1, 1};
  Graph<double> g(false);
  const std::vector<std::size_t> valid{4, 9};
  const Activation a = conv2d(g, g.constant(padded), g.constant(w), kNoNode, geo, valid);
  const auto ref = conv_oracle(solo, w, geo);
  EXPECT_EQ(a.valid_t, (std::vector<std::size_t>{2, 5}));
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t f = 0; f < ref.dim(2); ++f)
      for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(g.value(a.node).at(0, o, f, t), ref.at(0, o, f, t), 1e-12);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto x = random_tensor({2, 2, 5, 6}, rng);
  auto w = random_tensor({3, 2, 3, 3}, rng);
  auto bias = random_tensor({3}, rng);
  const std::vector<std::size_t> valid{6, 4};
  auto build = [&](Graph<double>& g) {
    const Activation a = conv2d(g, g.param(x), g.param(w), g.param(bias), {2, 1, 1, 1}, valid);
    return weighted_sum(g, a.node);
  };
  EXPECT_LT(grad_check(build, x), 1e-7);
  EXPECT_LT(grad_check(build, w), 1e-7);
  EXPECT_LT(grad_check(build, bias), 1e-7);
}

// --------------------------------------------------------------- pooling

TEST(MaxPool, CeilModeKeepsPartialWindows) {
  Graph<double> g(false);
  Tensor<double> x({1, 1, 3, 5});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const Activation a = max_pool2d(g, g.constant(x), 2, 2);
  const auto& y = g.value(a.node);
  ASSERT_EQ(y.shape, (Shape{1, 1, 2, 3}));
  EXPECT_EQ(y.data, (std::vector<double>{6, 8, 9, 11, 13, 14}));
  EXPECT_EQ(a.valid_t, (std::vector<std::size_t>{3}));
}

TEST(MaxPool, GradientRoutesToArgmax) {
  std::mt19937_64 rng(7);
  auto x = random_tensor({2, 2, 4, 5}, rng);
  const std::vector<std::size_t> valid{5, 3};
  auto build = [&](Graph<double>& g) {
    const Activation a = max_pool2d(g, g.param(x), 2, 2, valid);
    return mean(g, gap_masked(g, a.node, a.valid_t));
  };
  EXPECT_LT(grad_check(build, x), 1e-7);
}

// ------------------------------------------------------------------- GAP

TEST(GapMasked, ConstantInputGivesConstant) {
  Graph<double> g(false);
  const std::vector<std::size_t> valid{4};
  const NodeId y = gap_masked(g, g.constant(Tensor<double>({1, 3, 2, 4}, 2.5)), valid);
  for (double v : g.value(y).data) EXPECT_EQ(v, 2.5);
}

TEST(GapMasked, HandMeanOverValidPrefix) {
  Graph<double> g(false);
  const std::vector<std::size_t> valid{2};
  const NodeId y = gap_masked(g, g.constant(Tensor<double>({1, 1, 1, 4}, {1, 2, 3, 4})), valid);
  EXPECT_EQ(g.value(y)[0], 1.5);
}

TEST(GapMasked, FullLengthEqualsUnmaskedMean) {
  std::mt19937_64 rng(8);
  const auto x = random_tensor({2, 3, 4, 5}, rng);
  Graph<double> g(false);
  const std::vector<std::size_t> valid{5, 5};
  const NodeId masked = gap_masked(g, g.constant(x), valid);
  const NodeId plain = gap_masked(g, g.constant(x), std::span<const std::size_t>{});
  EXPECT_EQ(g.value(masked), g.value(plain));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0;
      for (std::size_t f = 0; f < 4; ++f)
        for (std::size_t t = 0; t < 5; ++t) acc += x.at(b, c, f, t);
      EXPECT_NEAR(g.value(plain).at(b, c), acc / 20, 1e-12);
    }
}

TEST(GapMasked, AppendedFramesBeyondValidAreIgnored) {
  std::mt19937_64 rng(9);
  const auto x = random_tensor({1, 2, 3, 4}, rng);
  Tensor<double> longer({1, 2, 3, 9}, 0.0);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t t = 0; t < 9; ++t) longer.at(0, c, f, t) = t < 4 ? x.at(0, c, f, t) : 100.0 * (t % 3 == 0);
  Graph<double> g(false);
  const std::vector<std::size_t> valid{4};
  const Tensor<double> short_mean = g.value(gap_masked(g, g.constant(x), valid));
  const Tensor<double> long_mean = g.value(gap_masked(g, g.constant(longer), valid));
  EXPECT_EQ(short_mean, long_mean);
}

TEST(GapMasked, ValidLengthOutOfRange) {
  Graph<double> g(false);
  const NodeId x = g.constant(Tensor<double>({1, 1, 1, 4}));
  const std::vector<std::size_t> zero{0}, big{5};
  EXPECT_THROW(gap_masked(g, x, zero), ValidationError);
  EXPECT_THROW(gap_masked(g, x, big), ValidationError);
}

// --------------------------------------------------------------- softmax

TEST(BlockSoftmax, EqualActivationsInActiveBlock) {
  const BlockLayout layout{{{0, 2}, {2, 4}}};
  const Tensor<double> a({1, 4}, {1, 1, 2, 0});
  const std::vector<int> l0{0}, l1{1};
  EXPECT_EQ(block_softmax(a, layout, l0).data, (std::vector<double>{0.5, 0.5, 0, 0}));
  const auto y = block_softmax(a, layout, l1);
  const double e2 = std::exp(2.0);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_NEAR(y[2], e2 / (e2 + 1), 1e-15);
  EXPECT_NEAR(y[3], 1 / (e2 + 1), 1e-15);
  EXPECT_NEAR(y[2], 0.88080, 1e-5);
  EXPECT_NEAR(y[3], 0.11920, 1e-5);
}

TEST(BlockSoftmax, SingleBlockEqualsStandardSoftmax) {
  std::mt19937_64 rng(10);
  const auto a = random_tensor({50, 7}, rng, -20, 20);
  const std::vector<int> lang(50, 0);
  const auto y = block_softmax(a, BlockLayout::single(7), lang);
  for (std::size_t b = 0; b < 50; ++b) {
    double z = 0;
    for (std::size_t i = 0; i < 7; ++i) z += std::exp(a.at(b, i));
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(y.at(b, i), std::exp(a.at(b, i)) / z, 1e-12);
  }
}

TEST(BlockSoftmax, ActiveBlockSumsToOneAndInactiveIsExactlyZero) {
  std::mt19937_64 rng(11);
  const BlockLayout layout{{{0, 3}, {3, 8}, {8, 9}}};
  const auto a = random_tensor({30, 9}, rng, -50, 50);
  std::vector<int> lang(30);
  for (std::size_t b = 0; b < 30; ++b) lang[b] = static_cast<int>(b % 3);
  const auto y = block_softmax(a, layout, lang);
  for (std::size_t b = 0; b < 30; ++b) {
    const auto [lo, hi] = layout.blocks[static_cast<std::size_t>(lang[b])];
    double s = 0;
    for (std::size_t i = 0; i < 9; ++i) {
      if (i >= lo && i < hi)
        s += y.at(b, i);
      else
        EXPECT_EQ(y.at(b, i), 0.0);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(BlockSoftmax, GradientIsZeroOutsideActiveBlock) {
  std::mt19937_64 rng(12);
  auto a = random_tensor({2, 4}, rng);
  const BlockLayout layout{{{0, 2}, {2, 4}}};
  const std::vector<int> lang{0, 1};
  Graph<double> g(true);
  const NodeId an = g.param(a);
  const NodeId y = block_softmax(g, an, layout, lang);
  g.backward(weighted_sum(g, y));
  const auto& ga = *g.grad(an);
  EXPECT_EQ(ga.at(0, 2), 0.0);
  EXPECT_EQ(ga.at(0, 3), 0.0);
  EXPECT_EQ(ga.at(1, 0), 0.0);
  EXPECT_EQ(ga.at(1, 1), 0.0);
  EXPECT_NE(ga.at(0, 0), 0.0);
  EXPECT_NE(ga.at(1, 3), 0.0);
}

// ---------------------------------------------------------- cross-entropy

double ce_value(const Tensor<double>& logits, std::vector<int> targets, const BlockLayout* layout = nullptr,
                std::vector<int> lang = {}) {
  Graph<double> g(false);
  return g.value(softmax_cross_entropy(g, g.constant(logits), targets, layout, lang))[0];
}

TEST(CrossEntropy, EqualTwoClassLogitsGiveLn2) {
  EXPECT_NEAR(ce_value(Tensor<double>({1, 2}, {0.3, 0.3}), {0}), std::log(2.0), 1e-15);
}

TEST(CrossEntropy, LargeMarginApproachesZero) {
  EXPECT_LT(ce_value(Tensor<double>({1, 3}, {50, 0, -10}), {0}), 1e-20);
  EXPECT_TRUE(std::isfinite(ce_value(Tensor<double>({1, 2}, {1000, -1000}), {1})));
}

TEST(CrossEntropy, BlockModeUsesOnlyTheActiveBlock) {
  const BlockLayout layout{{{0, 2}, {2, 4}}};
  // Inactive logits are huge but irrelevant.
  EXPECT_NEAR(ce_value(Tensor<double>({1, 4}, {500, 500, 1, 1}), {3}, &layout, {1}), std::log(2.0), 1e-15);
}

TEST(CrossEntropy, TargetOutsideActiveBlockIsMismatch) {
  const BlockLayout layout{{{0, 2}, {2, 4}}};
  try {
    ce_value(Tensor<double>({1, 4}), {1}, &layout, {1});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("label/language mismatch"), std::string::npos);
  }
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  auto logits = random_tensor({3, 4}, rng, -2, 2);
  const std::vector<int> targets{2, 0, 3};
  auto build = [&](Graph<double>& g) { return mean(g, softmax_cross_entropy(g, g.param(logits), targets)); };
  EXPECT_LT(grad_check(build, logits), 1e-6);

  const BlockLayout layout{{{0, 1}, {1, 4}}};
  const std::vector<int> lang{1, 0, 1};
  auto build_block = [&](Graph<double>& g) {
    return mean(g, softmax_cross_entropy(g, g.param(logits), targets, &layout, lang));
  };
  EXPECT_LT(grad_check(build_block, logits), 1e-6);
}

// -------------------------------------------------------------------- MSE

TEST(Mse, HandValues) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{2, 2}, z{0, 0};
  EXPECT_EQ(mse<double>(a, a), 0.0);
  EXPECT_EQ(mse<double>(a, b), 1.0);
  EXPECT_EQ(mse<double>(c, z), 4.0);
  EXPECT_EQ(mse<double>(a, b), mse<double>(b, a));
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(mse<double>(a, three), ShapeError);
}

TEST(Mse, RowGradientIsTwoOverDTimesDifference) {
  Tensor<double> e1({1, 3}, {1, 2, 3}), e2({1, 3}, {0, 4, 3});
  Graph<double> g(true);
  const NodeId a = g.param(e1), b = g.param(e2);
  const NodeId m = row_mse(g, a, b);
  EXPECT_NEAR(g.value(m)[0], 5.0 / 3.0, 1e-15);
  g.backward(mean(g, m));
  const auto& ga = *g.grad(a);
  const auto& gb = *g.grad(b);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(ga[k], 2.0 / 3.0 * (e1[k] - e2[k]), 1e-15);
    EXPECT_NEAR(gb[k], -ga[k], 1e-15);
  }
}

// --------------------------------------------------------------- optimizer

TEST(Nesterov, ZeroGradientIsAFixedPoint) {
  std::vector<double> p{1.5, -2.0}, v{0, 0};
  const std::vector<double> gr{0, 0};
  sgd_nesterov_step<double>(p, gr, v, 0.1, 0.9);
  EXPECT_EQ(p, (std::vector<double>{1.5, -2.0}));
  EXPECT_EQ(v, (std::vector<double>{0, 0}));
}

TEST(Nesterov, OneStepWithoutMomentum) {
  std::vector<double> p{1.0}, v{0.0};
  const std::vector<double> gr{2.0 * p[0]};
  sgd_nesterov_step<double>(p, gr, v, 0.1, 0.0);
  EXPECT_NEAR(p[0], 0.8, 1e-15);
}

TEST(Nesterov, MatchesLookAheadFormula) {
  std::vector<double> p{1.0}, v{0.5};
  const std::vector<double> gr{0.2};
  sgd_nesterov_step<double>(p, gr, v, 0.1, 0.9);
  const double v_new = 0.9 * 0.5 - 0.1 * 0.2;
  EXPECT_NEAR(v[0], v_new, 1e-15);
  EXPECT_NEAR(p[0], 1.0 + 0.9 * v_new - 0.1 * 0.2, 1e-15);
}

TEST(Nesterov, QuadraticBowlConverges) {
  std::vector<double> p{1.0, -3.0}, v{0, 0};
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> gr{2 * p[0], 2 * p[1]};
    sgd_nesterov_step<double>(p, gr, v, 0.05, 0.9);
  }
  EXPECT_LT(std::abs(p[0]), 1e-3);
  EXPECT_LT(std::abs(p[1]), 1e-3);
}

// -------------------------------------------------------------- grad check

TEST(GradCheck, LinearLayerIsNearExact) {
  std::mt19937_64 rng(14);
  auto x = random_tensor({3, 4}, rng);
  auto w = random_tensor({2, 4}, rng);
  auto b = random_tensor({2}, rng);
  auto build = [&](Graph<double>& g) { return mean(g, linear(g, g.param(x), g.param(w), g.param(b))); };
  EXPECT_LT(grad_check(build, w), 1e-8);
  EXPECT_LT(grad_check(build, b), 1e-8);
  EXPECT_LT(grad_check(build, x), 1e-8);
}

TEST(GradCheck, ReluAwayFromTheKink) {
  std::mt19937_64 rng(15);
  auto x = random_tensor({1, 1, 3, 4}, rng);
  for (auto& v : x.data) v = (v >= 0 ? 0.1 : -0.1) + v;  // |x| > 0.1
  auto build = [&](Graph<double>& g) {
    const NodeId r = relu(g, g.param(x));
    // Square so the loss is not piecewise linear in x.
    Tensor<double> sq(g.value(r).shape);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = g.value(r)[i] * g.value(r)[i];
    const NodeId s = g.record(std::move(sq), {r}, [r](Graph<double>& gr, const Tensor<double>& go) {
      auto& gg = gr.grad_mut(r);
      for (std::size_t i = 0; i < go.size(); ++i) gg[i] += 2 * gr.value(r)[i] * go[i];
    });
    return mean(g, s);
  };
  EXPECT_LT(grad_check(build, x), 1e-6);
}

TEST(GradCheck, NonFiniteLossIsDiagnosed) {
  Tensor<double> x({1}, {std::numeric_limits<double>::infinity()});
  auto build = [&](Graph<double>& g) { return mean(g, g.param(x)); };
  EXPECT_THROW(grad_check(build, x), NumericError);
}

TEST(GradCheck, ReusedNodeAccumulatesGradient) {
  Tensor<double> x({2}, {0.5, -1.5});
  auto build = [&](Graph<double>& g) {
    const NodeId p = g.param(x);
    return mean(g, add(g, p, scale(g, p, 3.0)));
  };
  Graph<double> g(true);
  const NodeId root = build(g);
  g.backward(root);
  EXPECT_EQ(g.grad(0)->data, (std::vector<double>{2.0, 2.0}));  // d/dx mean(4x) = 4/2
  EXPECT_LT(grad_check(build, x), 1e-9);
}

TEST(BlockLayout, ValidatesContiguity) {
  EXPECT_NO_THROW((BlockLayout{{{0, 2}, {2, 5}}}.validate()));
  EXPECT_THROW((BlockLayout{{{0, 2}, {3, 5}}}.validate()), ValidationError);
  EXPECT_THROW((BlockLayout{{{1, 2}}}.validate()), ValidationError);
  EXPECT_THROW((BlockLayout{{{0, 0}}}.validate()), ValidationError);
  EXPECT_THROW(BlockLayout{}.validate(), ValidationError);
  EXPECT_EQ((BlockLayout{{{0, 2}, {2, 5}}}.total()), 5u);
}

}  // namespace
}  // namespace awe::tk
