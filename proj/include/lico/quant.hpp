#ifndef LICO_QUANT_HPP_
#define LICO_QUANT_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lico/linearizer.hpp"
#include "lico/tensor.hpp"

namespace lico {

using QTensor2D = BasicTensor2D<std::int8_t>;

/// Keeps |acc| < 2^31: each term is at most 127 * 255.
inline constexpr std::size_t kMaxQuantizedInDim = 16384;

struct ValueRange {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void observe(double v) {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  void observe(std::span<const float> vs) {
    for (float v : vs) observe(v);
  }
  bool valid() const { return min <= max; }
};

struct StageRange {
  ValueRange input;
  ValueRange output;
};

/// Streams `calib_stream` through the float net and records per-stage min/max
/// of inputs and outputs. Rest columns count as observed since they populate
/// the rings at stream start.
inline std::vector<StageRange> calibrate_activations(const LinearizedNet& net, const Tensor2D& calib_stream) {
  require(calib_stream.channels() == net.input_features, ErrorKind::kCalibration,
          "calibration stream has wrong feature count");
  const std::size_t steps = calib_stream.frames() / net.chunk_size;
  require(steps >= 1, ErrorKind::kCalibration,
          "calibration stream of " + std::to_string(calib_stream.frames()) + " frames is shorter than one chunk");
  std::vector<StageRange> ranges(net.stages.size());
  for (std::size_t l = 0; l < net.stages.size(); ++l) {
    ranges[l].input.observe(net.stages[l].rest_input);
    if (l + 1 < net.stages.size()) ranges[l].output.observe(net.stages[l + 1].rest_input);
  }
  auto state = make_state(net);
  for (std::size_t j = 0; j < steps; ++j) {
    Tensor2D incoming = calib_stream.slice_frames(j * net.chunk_size, (j + 1) * net.chunk_size);
    std::vector<std::vector<float>> newest;
    for (std::size_t l = 0; l < net.stages.size(); ++l) {
      const LinearStage& st = net.stages[l];
      ranges[l].input.observe(incoming.values());
      newest.push_back(incoming.column(incoming.frames() - 1));
      const Tensor2D window = detail::advance_window(state.rings[l], incoming, st.kernel, st.ring_frames);
      std::vector<float> y = linear_forward(st.linear, window.values());
      if (st.residual_from)
        for (std::size_t d = 0; d < y.size(); ++d) y[d] += newest[*st.residual_from][d];
      ranges[l].output.observe(y);
      incoming = Tensor2D::from_column(y);
    }
  }
  return ranges;
}

struct QuantizedLinearLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<std::int8_t> weights;  // [in][out]
  QuantParams weight_params;         // symmetric, zero_point 0
  std::vector<std::int32_t> bias;    // in units of weight_scale * in_scale
  QuantParams in_params;
  QuantParams out_params;
  Activation activation = Activation::kNone;

  std::int8_t w(std::size_t i, std::size_t d) const noexcept { return weights[i * out_dim + d]; }

  friend bool operator==(const QuantizedLinearLayer&, const QuantizedLinearLayer&) = default;
};

struct QuantizedStage {
  std::string name;
  QuantizedLinearLayer layer;
  std::size_t in_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t ring_frames = 0;
  std::optional<std::size_t> residual_from;
  std::vector<std::int8_t> rest_input;

  friend bool operator==(const QuantizedStage&, const QuantizedStage&) = default;
};

struct QuantizedNet {
  std::size_t input_features = 0;
  std::size_t chunk_size = 1;
  QuantParams input_params;
  std::vector<QuantizedStage> stages;

  std::size_t n_classes() const { return stages.back().layer.out_dim; }

  friend bool operator==(const QuantizedNet&, const QuantizedNet&) = default;
};

namespace detail {

inline std::int8_t saturate_int8(double q) {
  return static_cast<std::int8_t>(std::clamp(q, double(kQMin), double(kQMax)));
}

/// Integer GEMV with zero-point correction, then requantization to the
/// layer's output params. `residual` is an int8 column in `residual_params`.
inline std::vector<std::int8_t> quantized_linear(const QuantizedLinearLayer& q, std::span<const std::int8_t> x,
                                                 std::span<const std::int8_t> residual = {},
                                                 const QuantParams* residual_params = nullptr) {
  require(x.size() == q.in_dim, ErrorKind::kShape, "quantized linear input size mismatch");
  std::vector<std::int32_t> dot(q.out_dim, 0);
  std::vector<std::int32_t> wsum(q.out_dim, 0);
  for (std::size_t i = 0; i < q.in_dim; ++i) {
    const std::int32_t xi = x[i];
    const std::int8_t* row = q.weights.data() + i * q.out_dim;
    for (std::size_t d = 0; d < q.out_dim; ++d) {
      dot[d] += static_cast<std::int32_t>(row[d]) * xi;
      wsum[d] += row[d];
    }
  }
  const double acc_scale = q.weight_params.scale * q.in_params.scale;
  const double to_out = acc_scale / q.out_params.scale;
  std::vector<std::int8_t> y(q.out_dim);
  for (std::size_t d = 0; d < q.out_dim; ++d) {
    const std::int64_t acc = static_cast<std::int64_t>(dot[d]) -
                             static_cast<std::int64_t>(q.in_params.zero_point) * wsum[d] + q.bias[d];
    double v = static_cast<double>(acc) * to_out;
    if (residual_params) {
      if (q.activation == Activation::kRelu) v = std::max(v, 0.0);
      v += static_cast<double>(residual[d] - residual_params->zero_point) * (residual_params->scale / q.out_params.scale);
      y[d] = saturate_int8(std::round(v) + q.out_params.zero_point);
    } else {
      std::int32_t out = saturate_int8(std::round(v) + q.out_params.zero_point);
      if (q.activation == Activation::kRelu) out = std::max(out, q.out_params.zero_point);
      y[d] = static_cast<std::int8_t>(out);
    }
  }
  return y;
}

inline QuantizedLinearLayer quantize_linear(const LinearLayer& lin, const QuantParams& in, const QuantParams& out,
                                            const std::string& name) {
  require(lin.in_dim <= kMaxQuantizedInDim, ErrorKind::kConfig,
          name + ": input dimension " + std::to_string(lin.in_dim) + " exceeds the int32 accumulator bound");
  QuantizedLinearLayer q;
  q.in_dim = lin.in_dim;
  q.out_dim = lin.out_dim;
  q.in_params = in;
  q.out_params = out;
  q.activation = lin.activation;
  const auto [wmin, wmax] = std::minmax_element(lin.weights.begin(), lin.weights.end());
  q.weight_params = lin.weights.empty() ? QuantParams{} : choose_quant_params(*wmin, *wmax, QuantMode::kSymmetric);
  q.weights.resize(lin.weights.size());
  for (std::size_t i = 0; i < lin.weights.size(); ++i) q.weights[i] = quantize_value(lin.weights[i], q.weight_params);
  const double bias_scale = q.weight_params.scale * in.scale;
  q.bias.resize(lin.bias.size());
  for (std::size_t d = 0; d < lin.bias.size(); ++d) {
    const double b = std::round(static_cast<double>(lin.bias[d]) / bias_scale);
    require(std::abs(b) <= double(std::numeric_limits<std::int32_t>::max()), ErrorKind::kCalibration,
            name + ": bias does not fit in int32 at this input scale");
    q.bias[d] = static_cast<std::int32_t>(b);
  }
  return q;
}

}  // namespace detail

/// Symmetric per-tensor weights, asymmetric per-stage activations, biases
/// pre-scaled to int32.
inline QuantizedNet quantize_network(const LinearizedNet& net, const std::vector<StageRange>& ranges) {
  require(ranges.size() == net.stages.size(), ErrorKind::kCalibration,
          "have " + std::to_string(ranges.size()) + " calibration ranges for " + std::to_string(net.stages.size()) +
              " stages");
  for (std::size_t l = 0; l < ranges.size(); ++l)
    require(ranges[l].input.valid() && ranges[l].output.valid(), ErrorKind::kCalibration,
            net.stages[l].name + ": missing calibration range");
  QuantizedNet q;
  q.input_features = net.input_features;
  q.chunk_size = net.chunk_size;
  q.input_params = choose_quant_params(ranges[0].input.min, ranges[0].input.max, QuantMode::kAsymmetric);
  QuantParams in = q.input_params;
  for (std::size_t l = 0; l < net.stages.size(); ++l) {
    const LinearStage& st = net.stages[l];
    const QuantParams out = choose_quant_params(ranges[l].output.min, ranges[l].output.max, QuantMode::kAsymmetric);
    QuantizedStage qs;
    qs.name = st.name;
    qs.layer = detail::quantize_linear(st.linear, in, out, st.name);
    qs.in_channels = st.in_channels;
    qs.kernel = st.kernel;
    qs.stride = st.stride;
    qs.ring_frames = st.ring_frames;
    qs.residual_from = st.residual_from;
    q.stages.push_back(std::move(qs));
    in = out;
  }
  // Rest columns in the integer domain: the int8 pipeline's own response to
  // all-zero input, so a fresh stream is self-consistent.
  std::vector<std::int8_t> z(net.input_features, quantize_value(0.0, q.input_params));
  for (auto& qs : q.stages) {
    qs.rest_input = z;
    std::vector<std::int8_t> window;
    window.reserve(qs.in_channels * qs.kernel);
    for (std::size_t c = 0; c < qs.in_channels; ++c) window.insert(window.end(), qs.kernel, z[c]);
    if (qs.residual_from) {
      const QuantizedStage& src = q.stages[*qs.residual_from];
      z = detail::quantized_linear(qs.layer, window, src.rest_input, &src.layer.in_params);
    } else {
      z = detail::quantized_linear(qs.layer, window);
    }
  }
  return q;
}

struct QuantizedState {
  std::vector<QTensor2D> rings;
};

inline void reset(const QuantizedNet& net, QuantizedState& state) {
  state.rings.clear();
  for (const auto& st : net.stages) state.rings.push_back(QTensor2D::repeat_column(st.rest_input, st.ring_frames));
}

inline QuantizedState make_state(const QuantizedNet& net) {
  QuantizedState s;
  reset(net, s);
  return s;
}

/// One int8 inference step. Only the input quantization and the final
/// dequantization touch floating point outside the requantization multiplier.
inline Tensor2D quantized_step(const QuantizedNet& net, QuantizedState& state, const Tensor2D& chunk) {
  require(chunk.frames() == net.chunk_size, ErrorKind::kShape,
          "chunk has " + std::to_string(chunk.frames()) + " frames, expected " + std::to_string(net.chunk_size));
  require(chunk.channels() == net.input_features, ErrorKind::kShape, "chunk feature count mismatch");
  require(state.rings.size() == net.stages.size(), ErrorKind::kShape, "state does not belong to this network");
  QTensor2D incoming = quantize_affine(chunk, net.input_params).data;
  std::vector<std::vector<std::int8_t>> newest;
  newest.reserve(net.stages.size());
  for (std::size_t l = 0; l < net.stages.size(); ++l) {
    const QuantizedStage& st = net.stages[l];
    newest.push_back(incoming.column(incoming.frames() - 1));
    const QTensor2D window = detail::advance_window(state.rings[l], incoming, st.kernel, st.ring_frames);
    std::vector<std::int8_t> y;
    if (st.residual_from) {
      const QuantizedStage& src = net.stages[*st.residual_from];
      y = detail::quantized_linear(st.layer, window.values(), newest[*st.residual_from], &src.layer.in_params);
    } else {
      y = detail::quantized_linear(st.layer, window.values());
    }
    incoming = QTensor2D::from_column(y);
  }
  return dequantize_affine({incoming, net.stages.back().layer.out_params});
}

class QuantizedEngine {
 public:
  explicit QuantizedEngine(QuantizedNet net) : net_(std::move(net)), state_(make_state(net_)) {}

  Tensor2D step(const Tensor2D& chunk) { return quantized_step(net_, state_, chunk); }
  void reset() { lico::reset(net_, state_); }
  const QuantizedNet& net() const noexcept { return net_; }

 private:
  QuantizedNet net_;
  QuantizedState state_;
};

}  // namespace lico

#endif  // LICO_QUANT_HPP_
