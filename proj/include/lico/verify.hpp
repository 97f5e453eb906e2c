#ifndef LICO_VERIFY_HPP_
#define LICO_VERIFY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lico/accounting.hpp"
#include "lico/decoder.hpp"
#include "lico/linearizer.hpp"
#include "lico/pipeline.hpp"
#include "lico/quant.hpp"

namespace lico {

struct VerifyTolerances {
  double streaming_vs_batch = 1e-5;
  double linear_vs_streaming = 1e-6;
  double int8_posterior_drift = 0.05;
};

struct VerifyReport {
  std::size_t steps = 0;
  double streaming_vs_batch = 0.0;
  double linear_vs_streaming = 0.0;
  std::uint64_t macs_expected = 0;
  std::uint64_t macs_executed_per_step = 0;
  bool macs_match = true;
  /// Largest per-class mean |p_int8 - p_float| over the run.
  double int8_posterior_drift = 0.0;
  bool int8_deterministic = true;

  bool passed(const VerifyTolerances& tol = {}) const {
    return streaming_vs_batch <= tol.streaming_vs_batch && linear_vs_streaming <= tol.linear_vs_streaming &&
           macs_match && int8_posterior_drift <= tol.int8_posterior_drift && int8_deterministic;
  }
};

inline Tensor2D random_stream(std::size_t features, std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  Tensor2D x(features, frames);
  for (auto& v : x.values()) v = dist(rng);
  return x;
}

/// Runs the three equivalence checks on `steps` inference steps of seeded
/// Gaussian features, streamed with chunk size equal to the first stride.
inline VerifyReport verify_equivalence(const LayerGraph& g, std::size_t steps, std::uint64_t seed) {
  validate(g);
  require(steps >= 1, ErrorKind::kConfig, "verify needs at least one step");
  const std::size_t t = g.stages.front().conv.stride;
  const Tensor2D x = random_stream(g.input_features, steps * t, seed);
  VerifyReport rep;
  rep.steps = steps;

  StreamingPipeline pipe(g, t);
  const Tensor2D streamed = pipe.run(x);
  const Tensor2D batch = network_forward(g, pad_left(x, streaming_left_pad(g)));
  rep.streaming_vs_batch = max_abs_diff(streamed, batch);

  const LinearizedNet lnet = linearize_network(g, t);
  LinearizedState ls = make_state(lnet);
  rep.macs_expected = count_macs_per_step(g);
  std::vector<std::vector<double>> float_post;
  for (std::size_t j = 0; j < steps; ++j) {
    const std::uint64_t before = ls.macs;
    const Tensor2D y = linearized_step(lnet, ls, x.slice_frames(j * t, (j + 1) * t));
    if (ls.macs - before != rep.macs_expected) rep.macs_match = false;
    rep.macs_executed_per_step = ls.macs - before;
    rep.linear_vs_streaming = std::max(rep.linear_vs_streaming, max_abs_diff(y, streamed.slice_frames(j, j + 1)));
    float_post.push_back(softmax(y.values()));
  }

  const QuantizedNet qnet = quantize_network(lnet, calibrate_activations(lnet, x));
  std::vector<Tensor2D> runs[2];
  for (auto& run : runs) {
    QuantizedState qs = make_state(qnet);
    for (std::size_t j = 0; j < steps; ++j) run.push_back(quantized_step(qnet, qs, x.slice_frames(j * t, (j + 1) * t)));
  }
  std::vector<double> drift(g.n_classes(), 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    if (runs[0][j] != runs[1][j]) rep.int8_deterministic = false;
    const auto p = softmax(runs[0][j].values());
    for (std::size_t c = 0; c < p.size(); ++c) drift[c] += std::abs(p[c] - float_post[j][c]);
  }
  for (double d : drift) rep.int8_posterior_drift = std::max(rep.int8_posterior_drift, d / static_cast<double>(steps));
  return rep;
}

}  // namespace lico

#endif  // LICO_VERIFY_HPP_
