#include <gtest/gtest.h>

#include <random>

#include "lico/decoder.hpp"
#include "lico/quant.hpp"
#include "test_util.hpp"

namespace lico {
namespace {

LinearizedNet single_stage(Conv1DLayer layer) {
  LayerGraph g;
  g.input_features = layer.in_channels;
  g.stages.push_back({"only", std::move(layer), std::nullopt});
  return linearize_network(g, g.stages[0].conv.stride);
}

Tensor2D uniform_stream(std::mt19937_64& rng, std::size_t c, std::size_t n, float lo, float hi) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor2D x(c, n);
  for (auto& v : x.values()) v = dist(rng);
  return x;
}

void zero_weights(LinearizedNet& lnet) {
  for (auto& s : lnet.stages) {
    std::fill(s.linear.weights.begin(), s.linear.weights.end(), 0.0f);
    std::fill(s.linear.bias.begin(), s.linear.bias.end(), 0.0f);
    std::fill(s.rest_input.begin(), s.rest_input.end(), 0.0f);
  }
}

TEST(Calibrate, ZeroStreamGivesZeroRanges) {
  LinearizedNet lnet = linearize_network(build_lico_net(8, 2, 4, 2, 3, 1, 3, 1), 1);
  zero_weights(lnet);
  for (const auto& r : calibrate_activations(lnet, Tensor2D(8, 20))) {
    EXPECT_EQ(r.input.min, 0.0);
    EXPECT_EQ(r.input.max, 0.0);
    EXPECT_EQ(r.output.min, 0.0);
    EXPECT_EQ(r.output.max, 0.0);
  }
}

TEST(Calibrate, ReluOutputNonNegative) {
  std::mt19937_64 rng(1);
  const auto lnet = single_stage(testing::random_layer(rng, 4, 6, 3, 1, Activation::kRelu));
  const auto r = calibrate_activations(lnet, uniform_stream(rng, 4, 200, -1, 1));
  EXPECT_GE(r[0].output.min, 0.0);
  EXPECT_GT(r[0].output.max, 0.0);
  EXPECT_GE(r[0].input.min, -1.0);
  EXPECT_LE(r[0].input.max, 1.0);
}

TEST(Calibrate, StreamTooShort) {
  std::mt19937_64 rng(2);
  const auto lnet = linearize_network(build_lico_net(8, 1, 4, 2, 3, 3, 3, 1), 3);
  try {
    calibrate_activations(lnet, Tensor2D(8, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCalibration);
  }
}

// Truncating the net after stage l exposes that stage's output, so replaying
// the stream checks every recorded range against every activation.
TEST(Calibrate, RangesBoundReplayedActivations) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    const auto cfg = testing::random_net_config(rng, 50 + i);
    const auto lnet = linearize_network(testing::build(cfg, 10, 4), cfg.stride);
    const Tensor2D x = testing::random_tensor(rng, 10, 80 * cfg.stride);
    const auto ranges = calibrate_activations(lnet, x);
    for (std::size_t l = 0; l < lnet.stages.size(); ++l) {
      LinearizedNet prefix = lnet;
      prefix.stages.resize(l + 1);
      LinearizedState st = make_state(prefix);
      for (std::size_t j = 0; j < 80; ++j) {
        const Tensor2D y = linearized_step(prefix, st, x.slice_frames(j * cfg.stride, (j + 1) * cfg.stride));
        for (float v : y.values()) {
          ASSERT_GE(v, ranges[l].output.min) << cfg.describe() << " stage " << l;
          ASSERT_LE(v, ranges[l].output.max) << cfg.describe() << " stage " << l;
        }
      }
    }
  }
}

TEST(QuantizeNetwork, ZeroNetStaysZero) {
  LinearizedNet lnet = linearize_network(build_lico_net(8, 2, 4, 2, 3, 1, 3, 1), 1);
  zero_weights(lnet);
  std::mt19937_64 rng(4);
  const Tensor2D x = testing::random_tensor(rng, 8, 50);
  const QuantizedNet q = quantize_network(lnet, calibrate_activations(lnet, x));
  for (const auto& s : q.stages) {
    for (auto w : s.layer.weights) EXPECT_EQ(w, 0);
    for (auto b : s.layer.bias) EXPECT_EQ(b, 0);
  }
  QuantizedState st = make_state(q);
  for (std::size_t j = 0; j < 50; ++j) {
    const Tensor2D y = quantized_step(q, st, x.slice_frames(j, j + 1));
    for (float v : y.values()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(QuantizeNetwork, PointwiseWeightsScaleByMaxAbs) {
  Conv1DLayer l(2, 2, 1, 1);
  l.weights = {0.5f, 0.0f, 0.0f, 0.25f};
  const auto lnet = single_stage(l);
  std::mt19937_64 rng(5);
  const QuantizedNet q = quantize_network(lnet, calibrate_activations(lnet, uniform_stream(rng, 2, 40, -1, 1)));
  const auto& ql = q.stages[0].layer;
  EXPECT_EQ(ql.weight_params.zero_point, 0);
  EXPECT_EQ(ql.w(0, 0), 127);
  EXPECT_EQ(ql.w(1, 1), 64);  // 0.25 * 127 / 0.5 = 63.5
  EXPECT_EQ(ql.w(0, 1), 0);
  EXPECT_EQ(ql.w(1, 0), 0);
}

TEST(QuantizeNetwork, BiasPrescaled) {
  std::mt19937_64 rng(6);
  const auto lnet = single_stage(testing::random_layer(rng, 3, 4, 2, 1));
  const QuantizedNet q = quantize_network(lnet, calibrate_activations(lnet, testing::random_tensor(rng, 3, 30)));
  const auto& ql = q.stages[0].layer;
  for (std::size_t d = 0; d < 4; ++d)
    EXPECT_EQ(ql.bias[d], std::round(lnet.stages[0].linear.bias[d] / (ql.weight_params.scale * ql.in_params.scale)));
}

TEST(QuantizedStep, IdentityWithinOneQuantum) {
  Conv1DLayer l(1, 1, 1, 1);
  l.weights = {1.0f};
  const auto lnet = single_stage(l);
  std::mt19937_64 rng(7);
  const QuantizedNet q = quantize_network(lnet, calibrate_activations(lnet, uniform_stream(rng, 1, 100, 0, 2)));
  QuantizedState st = make_state(q);
  const float y = quantized_step(q, st, Tensor2D(1, 1, std::vector<float>{1.0f})).values()[0];
  EXPECT_LE(std::abs(y - 1.0), q.stages[0].layer.out_params.scale);
}

TEST(QuantizedStep, ReluClampsAtZeroPoint) {
  Conv1DLayer l(1, 1, 1, 1, Activation::kRelu);
  l.weights = {1.0f};
  const auto lnet = single_stage(l);
  std::mt19937_64 rng(8);
  const Tensor2D x = uniform_stream(rng, 1, 200, -1, 1);
  const QuantizedNet q = quantize_network(lnet, calibrate_activations(lnet, x));
  const double quantum = q.input_params.scale / 2 + q.stages[0].layer.out_params.scale;
  QuantizedState st = make_state(q);
  for (std::size_t j = 0; j < 200; ++j) {
    const float v = x(0, j);
    const float y = quantized_step(q, st, x.slice_frames(j, j + 1)).values()[0];
    if (v <= 0) {
      EXPECT_EQ(y, 0.0f);
    }
    EXPECT_LE(std::abs(y - std::max(v, 0.0f)), quantum);
  }
}

TEST(QuantizedStep, DriftAndDeterminism) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 5; ++i) {
    const auto cfg = testing::random_net_config(rng, 70 + i);
    const auto lnet = linearize_network(testing::build(cfg), cfg.stride);
    const std::size_t steps = 1000, t = cfg.stride;
    const Tensor2D x = testing::random_tensor(rng, 40, steps * t);
    const QuantizedNet q = quantize_network(lnet, calibrate_activations(lnet, x));
    QuantizedEngine a(q), b(q);
    LinearizedEngine f(lnet);
    std::vector<double> drift(lnet.n_classes(), 0.0);
    for (std::size_t j = 0; j < steps; ++j) {
      const Tensor2D chunk = x.slice_frames(j * t, (j + 1) * t);
      const Tensor2D qa = a.step(chunk);
      ASSERT_EQ(qa, b.step(chunk));
      const auto pq = softmax(qa.values());
      const auto pf = softmax(f.step(chunk).values());
      for (std::size_t c = 0; c < drift.size(); ++c) drift[c] += std::abs(pq[c] - pf[c]);
    }
    for (double d : drift) EXPECT_LE(d / steps, 0.05) << cfg.describe();
  }
}

TEST(QuantizeNetwork, RejectsOversizedInput) {
  const auto lnet = single_stage(Conv1DLayer(4100, 1, 4, 1));
  try {
    quantize_network(lnet, calibrate_activations(lnet, Tensor2D(4100, 4)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("16400"), std::string::npos);
  }
}

TEST(QuantizeNetwork, MissingRange) {
  const auto lnet = linearize_network(build_lico_net(8, 1, 4, 2, 3, 1, 3, 1), 1);
  auto ranges = calibrate_activations(lnet, Tensor2D(8, 5));
  ranges[2].output = ValueRange{};
  EXPECT_THROW(quantize_network(lnet, ranges), Error);
  ranges.pop_back();
  try {
    quantize_network(lnet, ranges);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCalibration);
  }
}

}  // namespace
}  // namespace lico
