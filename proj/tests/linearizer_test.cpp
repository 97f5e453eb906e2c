#include <gtest/gtest.h>

#include <random>

#include "lico/accounting.hpp"
#include "lico/linearizer.hpp"
#include "lico/pipeline.hpp"
#include "test_util.hpp"

namespace lico {
namespace {

TEST(LinearizeConvLayer, ReshapeExample) {
  Conv1DLayer l(2, 1, 2, 1);
  l.weights = {1, 2, 3, 4};
  const LinearLayer lin = linearize_conv_layer(l);
  EXPECT_EQ(lin.in_dim, 4u);
  EXPECT_EQ(lin.out_dim, 1u);
  EXPECT_EQ(lin.weights, (std::vector<float>{1, 2, 3, 4}));
}

TEST(LinearizeConvLayer, PointwiseIsTranspose) {
  std::mt19937_64 rng(1);
  const Conv1DLayer l = testing::random_layer(rng, 3, 5, 1, 1, Activation::kRelu);
  const LinearLayer lin = linearize_conv_layer(l);
  for (std::size_t d = 0; d < 5; ++d)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(lin.w(c, d), l.w(d, c, 0));
  EXPECT_EQ(lin.bias, l.bias);
  EXPECT_EQ(lin.activation, Activation::kRelu);
}

TEST(LinearizeConvLayer, MatchesConvOnRandomWindows) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const std::size_t c = 1 + rng() % 8, d = 1 + rng() % 8, k = 1 + rng() % 6;
    const auto l = testing::random_layer(rng, c, d, k, 1 + rng() % 3, i % 2 ? Activation::kRelu : Activation::kNone);
    const Tensor2D window = testing::random_tensor(rng, c, k);
    const auto lin = linear_forward(linearize_conv_layer(l), window.values());
    const auto ref = conv1d_forward(window, l).values();
    ASSERT_EQ(lin.size(), ref.size());
    for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_LE(std::abs(lin[j] - ref[j]), 1e-6f);
  }
}

TEST(LinearizeNetwork, StageLayout) {
  const LinearizedNet lnet = linearize_network(build_lico_net(40, 5, 32, 6, 5, 1, 11, 1), 1);
  ASSERT_EQ(lnet.stages.size(), 16u);
  EXPECT_EQ(lnet.classifier().name, "classifier");
  EXPECT_EQ(lnet.stages[0].ring_frames, 4u);
  EXPECT_EQ(lnet.stages[1].ring_frames, 0u);
  EXPECT_FALSE(lnet.stages[2].residual_from);
  ASSERT_TRUE(lnet.stages[5].residual_from);
  EXPECT_EQ(*lnet.stages[5].residual_from, 3u);
  EXPECT_EQ(lnet.n_classes(), 11u);
}

TEST(LinearizeNetwork, KernelEqualsStrideHasEmptyRing) {
  const LinearizedNet lnet = linearize_network(build_lico_net(4, 1, 4, 2, 3, 3, 2, 1), 3);
  EXPECT_EQ(lnet.stages[0].ring_frames, 0u);
  EXPECT_EQ(make_state(lnet).rings[0].frames(), 0u);
}

TEST(LinearizeNetwork, GateRejectsAndNamesLayer) {
  const LiCoNet net = build_lico_net(40, 3, 8, 2, 3, 3, 11, 1);
  try {
    linearize_network(net, 1);
    FAIL();
  } catch (const NotLinearizable& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotLinearizable);
    ASSERT_EQ(e.report().violations.size(), 1u);
    EXPECT_EQ(e.report().violations[0].layer, "block1.conv1");
    EXPECT_NE(std::string(e.what()).find("block1.conv1"), std::string::npos);
  }
  LiCoNet deep = build_lico_net(40, 4, 8, 2, 3, 1, 11, 1);
  deep.blocks[2].conv1.stride = 2;
  deep.blocks[2].residual = false;
  const auto report = check_linearizable(deep, 1);
  EXPECT_FALSE(report.compliant);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].layer, "block3.conv1");
  EXPECT_TRUE(check_linearizable(build_lico_net(40, 5, 16, 4, 4, 3, 11, 1), 3).compliant);
}

TEST(LinearizedStep, HandEvaluatedExample) {
  LayerGraph g;
  g.input_features = 1;
  Conv1DLayer l(1, 1, 2, 1);
  l.weights = {1, 1};
  g.stages.push_back({"only", l, std::nullopt});
  const LinearizedNet lnet = linearize_network(g, 1);
  LinearizedState st = make_state(lnet);
  for (auto [in, out] : {std::pair{1.0f, 1.0f}, {2.0f, 3.0f}, {3.0f, 5.0f}})
    EXPECT_EQ(linearized_step(lnet, st, Tensor2D(1, 1, std::vector<float>{in})).values()[0], out);
}

TEST(LinearizedStep, RejectsBadChunk) {
  const LinearizedNet lnet = linearize_network(build_lico_net(40, 1, 8, 2, 3, 2, 3, 1), 2);
  LinearizedState st = make_state(lnet);
  EXPECT_THROW(linearized_step(lnet, st, Tensor2D(40, 1)), Error);
  EXPECT_THROW(linearized_step(lnet, st, Tensor2D(39, 2)), Error);
}

TEST(LinearizedStep, ZeroWeightsGiveZeroLogits) {
  LinearizedNet lnet = linearize_network(build_lico_net(8, 2, 4, 2, 3, 1, 3, 1), 1);
  for (auto& s : lnet.stages) {
    std::fill(s.linear.weights.begin(), s.linear.weights.end(), 0.0f);
    std::fill(s.linear.bias.begin(), s.linear.bias.end(), 0.0f);
  }
  LinearizedState st = make_state(lnet);
  std::mt19937_64 rng(3);
  for (int j = 0; j < 20; ++j) {
    const Tensor2D y = linearized_step(lnet, st, testing::random_tensor(rng, 8, 1));
    for (float v : y.values()) EXPECT_EQ(v, 0.0f);
  }
}

// Linearized steps equal the conv pipeline (1e-6) and the batch forward on
// the zero-padded stream (1e-5); the executed MAC count equals the accounting.
TEST(LinearizedStep, EquivalentToStreamingAndBatch) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    const auto cfg = testing::random_net_config(rng, 100 + i);
    const LayerGraph g = to_graph(testing::build(cfg, 12, 5));
    const std::size_t t = cfg.stride, steps = 60;
    const Tensor2D x = testing::random_tensor(rng, 12, steps * t);

    StreamingPipeline pipe(g, t);
    const Tensor2D streamed = pipe.run(x);
    const Tensor2D batch = network_forward(g, pad_left(x, streaming_left_pad(g)));
    ASSERT_EQ(streamed.frames(), steps);
    ASSERT_EQ(batch.frames(), steps);
    EXPECT_LE(max_abs_diff(streamed, batch), 1e-5) << cfg.describe();

    const LinearizedNet lnet = linearize_network(g, t);
    LinearizedState st = make_state(lnet);
    Tensor2D lin;
    for (std::size_t j = 0; j < steps; ++j) {
      const std::uint64_t before = st.macs;
      lin = concat_frames(lin, linearized_step(lnet, st, x.slice_frames(j * t, (j + 1) * t)));
      ASSERT_EQ(st.macs - before, count_macs_per_step(g));
    }
    EXPECT_LE(max_abs_diff(lin, streamed), 1e-6) << cfg.describe();
    EXPECT_EQ(count_macs_per_step(lnet), count_macs_per_step(g));
  }
}

TEST(LinearizedEngine, ResetRestoresFreshState) {
  const LinearizedNet lnet = linearize_network(build_lico_net(6, 2, 4, 2, 3, 1, 3, 9), 1);
  LinearizedEngine eng(lnet);
  std::mt19937_64 rng(5);
  const Tensor2D x = testing::random_tensor(rng, 6, 10);
  std::vector<Tensor2D> first, second;
  for (std::size_t j = 0; j < 10; ++j) first.push_back(eng.step(x.slice_frames(j, j + 1)));
  eng.reset();
  EXPECT_EQ(eng.state().macs, 0u);
  for (std::size_t j = 0; j < 10; ++j) second.push_back(eng.step(x.slice_frames(j, j + 1)));
  EXPECT_EQ(first, second);
}

}  // namespace
}  // namespace lico
