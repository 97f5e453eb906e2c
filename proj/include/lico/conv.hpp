#ifndef LICO_CONV_HPP_
#define LICO_CONV_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lico/error.hpp"
#include "lico/tensor.hpp"

namespace lico {

enum class Activation { kNone, kRelu };

inline std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "none"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "none") return Activation::kNone;
  fail(ErrorKind::kParse, "unknown activation '" + std::string(s) + "'");
}

inline float activate(float v, Activation a) noexcept {
  return (a == Activation::kRelu && v < 0.0f) ? 0.0f : v;
}

inline Tensor2D apply_activation(Tensor2D x, Activation kind) {
  if (kind == Activation::kNone) return x;
  for (auto& v : x.values()) v = activate(v, kind);
  return x;
}

/// Causal 1D convolution. Weights are [out][in][kernel], row-major.
struct Conv1DLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::vector<float> weights;
  std::vector<float> bias;
  Activation activation = Activation::kNone;

  Conv1DLayer() = default;
  Conv1DLayer(std::size_t c_in, std::size_t d_out, std::size_t k, std::size_t s,
              Activation act = Activation::kNone)
      : in_channels(c_in), out_channels(d_out), kernel(k), stride(s),
        weights(d_out * c_in * k, 0.0f), bias(d_out, 0.0f), activation(act) {}

  float& w(std::size_t d, std::size_t c, std::size_t k) noexcept {
    return weights[(d * in_channels + c) * kernel + k];
  }
  float w(std::size_t d, std::size_t c, std::size_t k) const noexcept {
    return weights[(d * in_channels + c) * kernel + k];
  }

  std::size_t weight_count() const noexcept { return weights.size(); }
  std::size_t param_count() const noexcept { return weights.size() + bias.size(); }

  friend bool operator==(const Conv1DLayer&, const Conv1DLayer&) = default;
};

inline void validate(const Conv1DLayer& layer, std::string_view name = "conv") {
  const std::string n(name);
  require(layer.kernel >= 1 && layer.stride >= 1 && layer.in_channels >= 1 && layer.out_channels >= 1,
          ErrorKind::kConfig, n + ": kernel, stride and channel counts must be positive");
  require(layer.weights.size() == layer.out_channels * layer.in_channels * layer.kernel,
          ErrorKind::kShape, n + ": weight count does not match [D][C][K]");
  require(layer.bias.size() == layer.out_channels, ErrorKind::kShape, n + ": bias length != D");
  require(all_finite(layer.weights) && all_finite(layer.bias), ErrorKind::kInvalidInput,
          n + ": non-finite parameter");
}

inline std::size_t conv_output_frames(std::size_t frames, std::size_t kernel, std::size_t stride) {
  return frames < kernel ? 0 : (frames - kernel) / stride + 1;
}

/// Y[d][i] = act(bias[d] + sum_c sum_k W[d][c][k] * X[c][s*i + k]).
inline Tensor2D conv1d_forward(const Tensor2D& x, const Conv1DLayer& layer) {
  require(x.channels() == layer.in_channels, ErrorKind::kShape,
          "conv expects " + std::to_string(layer.in_channels) + " channels, got " +
              std::to_string(x.channels()));
  require(x.frames() >= layer.kernel, ErrorKind::kShape,
          "conv needs at least " + std::to_string(layer.kernel) + " frames, got " +
              std::to_string(x.frames()));
  const std::size_t out_frames = conv_output_frames(x.frames(), layer.kernel, layer.stride);
  Tensor2D y(layer.out_channels, out_frames);
  for (std::size_t d = 0; d < layer.out_channels; ++d) {
    for (std::size_t i = 0; i < out_frames; ++i) {
      double acc = layer.bias[d];
      const std::size_t base = layer.stride * i;
      for (std::size_t c = 0; c < layer.in_channels; ++c)
        for (std::size_t k = 0; k < layer.kernel; ++k)
          acc += static_cast<double>(layer.w(d, c, k)) * x(c, base + k);
      y(d, i) = activate(static_cast<float>(acc), layer.activation);
    }
  }
  return y;
}

/// History carried between streaming steps: the last K - s input frames.
struct StreamState {
  Tensor2D history;
  std::size_t chunk_size = 1;
};

inline std::size_t history_frames(const Conv1DLayer& layer) noexcept {
  return layer.kernel > layer.stride ? layer.kernel - layer.stride : 0;
}

inline StreamState stream_state_init(const Conv1DLayer& layer, std::size_t chunk_size) {
  require(chunk_size >= 1 && chunk_size % layer.stride == 0, ErrorKind::kConfig,
          "chunk size " + std::to_string(chunk_size) + " is not a positive multiple of stride " +
              std::to_string(layer.stride));
  return {Tensor2D(layer.in_channels, history_frames(layer)), chunk_size};
}

/// One streaming step. The window is the most recent t + K - s frames of
/// [history || chunk]; when K < s the leading s - K chunk frames never reach
/// a kernel tap and are dropped.
inline Tensor2D stream_step(const Conv1DLayer& layer, StreamState& state, const Tensor2D& chunk) {
  require(chunk.frames() == state.chunk_size, ErrorKind::kShape,
          "chunk has " + std::to_string(chunk.frames()) + " frames, state expects " +
              std::to_string(state.chunk_size));
  require(chunk.channels() == layer.in_channels, ErrorKind::kShape, "chunk channel mismatch");
  const Tensor2D joined = concat_frames(state.history, chunk);
  const std::size_t window = layer.kernel >= layer.stride
                                 ? joined.frames()
                                 : state.chunk_size - (layer.stride - layer.kernel);
  Tensor2D y = conv1d_forward(joined.last_frames(window), layer);
  state.history = joined.last_frames(history_frames(layer));
  return y;
}

}  // namespace lico

#endif  // LICO_CONV_HPP_
