#ifndef LICO_LINEARIZER_HPP_
#define LICO_LINEARIZER_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lico/conv.hpp"
#include "lico/linearizability.hpp"
#include "lico/model.hpp"

namespace lico {

/// Dense layer y = act(x W + b) with W stored [in][out].
struct LinearLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<float> weights;
  std::vector<float> bias;
  Activation activation = Activation::kNone;

  float& w(std::size_t i, std::size_t d) noexcept { return weights[i * out_dim + d]; }
  float w(std::size_t i, std::size_t d) const noexcept { return weights[i * out_dim + d]; }

  friend bool operator==(const LinearLayer&, const LinearLayer&) = default;
};

/// Reshapes W[d][c][k] to W~[c*K + k][d]. A C x K window flattened
/// channel-major (x~[c*K + k] = window[c][k]) then gives the conv output.
inline LinearLayer linearize_conv_layer(const Conv1DLayer& layer) {
  LinearLayer lin;
  lin.in_dim = layer.in_channels * layer.kernel;
  lin.out_dim = layer.out_channels;
  lin.weights.assign(lin.in_dim * lin.out_dim, 0.0f);
  for (std::size_t d = 0; d < layer.out_channels; ++d)
    for (std::size_t c = 0; c < layer.in_channels; ++c)
      for (std::size_t k = 0; k < layer.kernel; ++k) lin.w(c * layer.kernel + k, d) = layer.w(d, c, k);
  lin.bias = layer.bias;
  lin.activation = layer.activation;
  return lin;
}

/// y = act(b + x W). Accumulates in double, rows in ascending input order.
inline std::vector<float> linear_forward(const LinearLayer& lin, std::span<const float> x,
                                         std::uint64_t* macs = nullptr) {
  require(x.size() == lin.in_dim, ErrorKind::kShape,
          "linear input has " + std::to_string(x.size()) + " values, expected " + std::to_string(lin.in_dim));
  std::vector<double> acc(lin.bias.begin(), lin.bias.end());
  for (std::size_t i = 0; i < lin.in_dim; ++i) {
    const double xi = x[i];
    const float* row = lin.weights.data() + i * lin.out_dim;
    for (std::size_t d = 0; d < lin.out_dim; ++d) acc[d] += static_cast<double>(row[d]) * xi;
    if (macs) *macs += lin.out_dim;
  }
  std::vector<float> y(lin.out_dim);
  for (std::size_t d = 0; d < lin.out_dim; ++d) y[d] = activate(static_cast<float>(acc[d]), lin.activation);
  return y;
}

struct LinearStage {
  std::string name;
  LinearLayer linear;
  std::size_t in_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  /// Input columns carried between steps (K - s, never negative).
  std::size_t ring_frames = 0;
  std::optional<std::size_t> residual_from;
  /// Column the ring is primed with on reset.
  std::vector<float> rest_input;

  friend bool operator==(const LinearStage&, const LinearStage&) = default;
};

struct LinearizedNet {
  std::size_t input_features = 0;
  std::size_t chunk_size = 1;
  /// One stage per conv layer; the last one is the classifier.
  std::vector<LinearStage> stages;

  const LinearStage& classifier() const { return stages.back(); }
  std::size_t n_classes() const { return stages.back().linear.out_dim; }

  friend bool operator==(const LinearizedNet&, const LinearizedNet&) = default;
};

/// Per-stream ring buffers plus an executed multiply-accumulate counter.
struct LinearizedState {
  std::vector<Tensor2D> rings;
  std::uint64_t macs = 0;
};

inline void reset(const LinearizedNet& net, LinearizedState& state) {
  state.rings.clear();
  for (const auto& st : net.stages)
    state.rings.push_back(Tensor2D::repeat_column(st.rest_input, st.ring_frames));
  state.macs = 0;
}

inline LinearizedState make_state(const LinearizedNet& net) {
  LinearizedState s;
  reset(net, s);
  return s;
}

inline LinearizedNet linearize_network(const LayerGraph& g, std::size_t chunk_size) {
  validate(g);
  auto report = check_linearizable(g, chunk_size);
  if (!report.compliant) throw NotLinearizable(std::move(report));
  const auto rest = rest_inputs(g);
  LinearizedNet net;
  net.input_features = g.input_features;
  net.chunk_size = chunk_size;
  for (std::size_t l = 0; l < g.stages.size(); ++l) {
    const Stage& st = g.stages[l];
    LinearStage ls;
    ls.name = st.name;
    ls.linear = linearize_conv_layer(st.conv);
    ls.in_channels = st.conv.in_channels;
    ls.kernel = st.conv.kernel;
    ls.stride = st.conv.stride;
    ls.ring_frames = history_frames(st.conv);
    ls.residual_from = st.residual_from;
    ls.rest_input = rest[l];
    net.stages.push_back(std::move(ls));
  }
  return net;
}

inline LinearizedNet linearize_network(const LiCoNet& net, std::size_t chunk_size) {
  return linearize_network(to_graph(net), chunk_size);
}

namespace detail {

/// [ring || incoming], trimmed to the newest `kernel` frames; the ring keeps
/// the trailing ring_frames columns.
template <typename T>
BasicTensor2D<T> advance_window(BasicTensor2D<T>& ring, const BasicTensor2D<T>& incoming, std::size_t kernel,
                                std::size_t ring_frames) {
  BasicTensor2D<T> joined = concat_frames(ring, incoming);
  BasicTensor2D<T> window = joined.last_frames(kernel);
  ring = joined.last_frames(ring_frames);
  return window;
}

}  // namespace detail

/// One inference step: chunk_size input frames in, one logit column out.
inline Tensor2D linearized_step(const LinearizedNet& net, LinearizedState& state, const Tensor2D& chunk) {
  require(chunk.frames() == net.chunk_size, ErrorKind::kShape,
          "chunk has " + std::to_string(chunk.frames()) + " frames, expected " + std::to_string(net.chunk_size));
  require(chunk.channels() == net.input_features, ErrorKind::kShape, "chunk feature count mismatch");
  require(state.rings.size() == net.stages.size(), ErrorKind::kShape, "state does not belong to this network");
  std::vector<std::vector<float>> newest;
  newest.reserve(net.stages.size());
  Tensor2D incoming = chunk;
  for (std::size_t l = 0; l < net.stages.size(); ++l) {
    const LinearStage& st = net.stages[l];
    newest.push_back(incoming.column(incoming.frames() - 1));
    const Tensor2D window = detail::advance_window(state.rings[l], incoming, st.kernel, st.ring_frames);
    std::vector<float> y = linear_forward(st.linear, window.values(), &state.macs);
    if (st.residual_from) {
      const auto& res = newest[*st.residual_from];
      for (std::size_t d = 0; d < y.size(); ++d) y[d] += res[d];
    }
    incoming = Tensor2D::from_column(y);
  }
  return incoming;
}

/// Convenience wrapper owning one stream's state.
class LinearizedEngine {
 public:
  explicit LinearizedEngine(LinearizedNet net) : net_(std::move(net)), state_(make_state(net_)) {}

  Tensor2D step(const Tensor2D& chunk) { return linearized_step(net_, state_, chunk); }
  void reset() { lico::reset(net_, state_); }
  const LinearizedNet& net() const noexcept { return net_; }
  const LinearizedState& state() const noexcept { return state_; }

 private:
  LinearizedNet net_;
  LinearizedState state_;
};

}  // namespace lico

#endif  // LICO_LINEARIZER_HPP_
