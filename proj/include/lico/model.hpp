#ifndef LICO_MODEL_HPP_
#define LICO_MODEL_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lico/conv.hpp"
#include "lico/error.hpp"
#include "lico/tensor.hpp"

namespace lico {

// -- flat layer graph ----------------------------------------------------------
//
// Every network in this library reduces to a chain of causal conv layers. A
// stage may carry a residual: the input stream of stage `residual_from` is
// added to its output, aligned on the newest frame. The last stage is always
// the classifier.

struct Stage {
  std::string name;
  Conv1DLayer conv;
  std::optional<std::size_t> residual_from;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct LayerGraph {
  std::size_t input_features = 0;
  std::vector<Stage> stages;

  std::size_t n_classes() const { return stages.empty() ? 0 : stages.back().conv.out_channels; }
  const Stage& classifier() const { return stages.back(); }

  friend bool operator==(const LayerGraph&, const LayerGraph&) = default;
};

inline void validate(const LayerGraph& g) {
  require(g.input_features >= 1, ErrorKind::kConfig, "input_features must be positive");
  require(!g.stages.empty(), ErrorKind::kConfig, "network has no layers");
  std::size_t channels = g.input_features;
  for (std::size_t l = 0; l < g.stages.size(); ++l) {
    const Stage& st = g.stages[l];
    validate(st.conv, st.name);
    require(st.conv.in_channels == channels, ErrorKind::kShape,
            st.name + ": expects " + std::to_string(st.conv.in_channels) + " input channels, chain provides " +
                std::to_string(channels));
    if (st.residual_from) {
      const std::size_t r = *st.residual_from;
      require(r <= l, ErrorKind::kConfig, st.name + ": residual source must precede the layer");
      require(g.stages[r].conv.in_channels == st.conv.out_channels, ErrorKind::kShape,
              st.name + ": residual width differs from layer output");
      for (std::size_t m = r; m <= l; ++m)
        require(g.stages[m].conv.stride == 1, ErrorKind::kConfig,
                st.name + ": residual path must have stride 1 throughout");
    }
    channels = st.conv.out_channels;
  }
}

// -- LiCo-Block / LiCo-Net / MLP ------------------------------------------------

struct LiCoBlock {
  Conv1DLayer conv1;  // K > 1, stride s, relu
  Conv1DLayer conv2;  // pointwise expand, relu
  Conv1DLayer conv3;  // pointwise project, no activation
  bool residual = false;

  friend bool operator==(const LiCoBlock&, const LiCoBlock&) = default;
};

/// Output widths of the three layers in a block.
struct BlockWidths {
  std::size_t conv1_out = 0;
  std::size_t inner = 0;
  std::size_t out = 0;
};

inline BlockWidths bottleneck_widths(std::size_t w, std::size_t e) { return {w, e * w, w}; }

struct LiCoNet {
  std::size_t input_features = 0;
  std::vector<LiCoBlock> blocks;
  Conv1DLayer classifier;

  std::size_t first_stride() const { return blocks.empty() ? 1 : blocks.front().conv1.stride; }
  std::size_t n_classes() const { return classifier.out_channels; }
};

struct MlpNet {
  std::size_t input_frames = 0;
  std::size_t input_features = 0;
  std::size_t stride = 1;
  /// hidden[0] spans the whole input window (kernel == input_frames); the rest are pointwise.
  std::vector<Conv1DLayer> hidden;
  Conv1DLayer classifier;
};

namespace detail {

inline std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform in [-a, a] with a = 1/sqrt(fan_in), weights then biases.
inline void init_uniform(Conv1DLayer& layer, std::mt19937_64& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(layer.in_channels * layer.kernel));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& w : layer.weights) w = static_cast<float>(dist(rng));
  for (auto& b : layer.bias) b = static_cast<float>(dist(rng));
}

}  // namespace detail

inline LiCoBlock build_lico_block(std::size_t c_in, const BlockWidths& widths, std::size_t kernel,
                                  std::size_t stride, std::uint64_t seed) {
  require(c_in >= 1 && widths.conv1_out >= 1 && widths.inner >= 1 && widths.out >= 1,
          ErrorKind::kConfig, "block widths must be positive");
  require(kernel >= 2, ErrorKind::kConfig, "block kernel must be > 1");
  require(stride >= 1, ErrorKind::kConfig, "block stride must be >= 1");
  LiCoBlock b;
  b.conv1 = Conv1DLayer(c_in, widths.conv1_out, kernel, stride, Activation::kRelu);
  b.conv2 = Conv1DLayer(widths.conv1_out, widths.inner, 1, 1, Activation::kRelu);
  b.conv3 = Conv1DLayer(widths.inner, widths.out, 1, 1, Activation::kNone);
  b.residual = stride == 1 && c_in == widths.out;
  auto rng = detail::seeded_engine(seed, 0);
  detail::init_uniform(b.conv1, rng);
  detail::init_uniform(b.conv2, rng);
  detail::init_uniform(b.conv3, rng);
  return b;
}

inline LiCoBlock build_lico_block(std::size_t c_in, std::size_t w, std::size_t e, std::size_t kernel,
                                  std::size_t stride, std::uint64_t seed) {
  require(e >= 2, ErrorKind::kConfig, "expansion factor must be >= 2");
  require(w >= 1, ErrorKind::kConfig, "block width must be positive");
  return build_lico_block(c_in, bottleneck_widths(w, e), kernel, stride, seed);
}

inline void validate(const LiCoBlock& b, std::string_view name = "block") {
  const std::string n(name);
  validate(b.conv1, n + ".conv1");
  validate(b.conv2, n + ".conv2");
  validate(b.conv3, n + ".conv3");
  require(b.conv1.kernel > 1, ErrorKind::kConfig, n + ": conv1 kernel must be > 1");
  require(b.conv2.kernel == 1 && b.conv3.kernel == 1, ErrorKind::kConfig, n + ": conv2/conv3 must be pointwise");
  require(b.conv2.in_channels == b.conv1.out_channels && b.conv3.in_channels == b.conv2.out_channels,
          ErrorKind::kShape, n + ": inner channel chain broken");
  require(!b.residual || (b.conv1.stride == 1 && b.conv1.in_channels == b.conv3.out_channels),
          ErrorKind::kConfig, n + ": residual needs stride 1 and matching widths");
}

inline std::string block_layer_name(std::size_t block, int layer) {
  return "block" + std::to_string(block + 1) + ".conv" + std::to_string(layer);
}

/// Checks structure only; stride placement is reported by check_linearizable
/// so that non-compliant nets stay constructible.
inline void validate(const LiCoNet& net) {
  require(net.input_features >= 1, ErrorKind::kConfig, "input_features must be positive");
  require(!net.blocks.empty(), ErrorKind::kConfig, "LiCo-Net needs at least one block");
  std::size_t channels = net.input_features;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    const std::string name = "block" + std::to_string(i + 1);
    validate(net.blocks[i], name);
    require(net.blocks[i].conv1.in_channels == channels, ErrorKind::kShape,
            name + ": input width does not match previous block");
    channels = net.blocks[i].conv3.out_channels;
  }
  validate(net.classifier, "classifier");
  require(net.classifier.kernel == 1 && net.classifier.in_channels == channels, ErrorKind::kShape,
          "classifier must map the last block width to the classes");
}

inline LiCoNet build_lico_net(std::size_t input_features, std::size_t n_blocks, std::size_t w, std::size_t e,
                              std::size_t kernel, std::size_t first_stride, std::size_t n_classes,
                              std::uint64_t seed) {
  require(input_features >= 1, ErrorKind::kConfig, "input_features must be positive");
  require(n_blocks >= 1, ErrorKind::kConfig, "need at least one block");
  require(n_classes >= 1, ErrorKind::kConfig, "need at least one class");
  LiCoNet net;
  net.input_features = input_features;
  for (std::size_t l = 0; l < n_blocks; ++l) {
    const std::size_t c_in = l == 0 ? input_features : w;
    const std::size_t stride = l == 0 ? first_stride : 1;
    net.blocks.push_back(build_lico_block(c_in, w, e, kernel, stride, seed * 1000003ULL + l + 1));
  }
  net.classifier = Conv1DLayer(w, n_classes, 1, 1, Activation::kNone);
  auto rng = detail::seeded_engine(seed, 0xC1A55);
  detail::init_uniform(net.classifier, rng);
  return net;
}

inline MlpNet build_mlp(std::size_t input_frames, std::size_t input_features, const std::vector<std::size_t>& hidden,
                        std::size_t n_classes, std::uint64_t seed, std::size_t stride = 1) {
  require(input_frames >= 1 && input_features >= 1 && n_classes >= 1 && stride >= 1, ErrorKind::kConfig,
          "MLP dimensions must be positive");
  MlpNet net;
  net.input_frames = input_frames;
  net.input_features = input_features;
  net.stride = stride;
  auto rng = detail::seeded_engine(seed, 0);
  std::size_t channels = input_features;
  std::size_t kernel = input_frames;
  std::size_t s = stride;
  for (std::size_t width : hidden) {
    require(width >= 1, ErrorKind::kConfig, "hidden width must be positive");
    Conv1DLayer layer(channels, width, kernel, s, Activation::kRelu);
    detail::init_uniform(layer, rng);
    net.hidden.push_back(std::move(layer));
    channels = width;
    kernel = 1;
    s = 1;
  }
  net.classifier = Conv1DLayer(channels, n_classes, kernel, s, Activation::kNone);
  detail::init_uniform(net.classifier, rng);
  return net;
}

inline MlpNet build_mlp(std::size_t input_frames, std::size_t input_features, std::size_t h1, std::size_t h2,
                        std::size_t n_classes, std::uint64_t seed, std::size_t stride = 1) {
  return build_mlp(input_frames, input_features, std::vector<std::size_t>{h1, h2}, n_classes, seed, stride);
}

inline LayerGraph to_graph(const LiCoNet& net) {
  validate(net);
  LayerGraph g;
  g.input_features = net.input_features;
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    const LiCoBlock& blk = net.blocks[b];
    const std::size_t first = g.stages.size();
    g.stages.push_back({block_layer_name(b, 1), blk.conv1, std::nullopt});
    g.stages.push_back({block_layer_name(b, 2), blk.conv2, std::nullopt});
    g.stages.push_back({block_layer_name(b, 3), blk.conv3,
                        blk.residual ? std::optional<std::size_t>(first) : std::nullopt});
  }
  g.stages.push_back({"classifier", net.classifier, std::nullopt});
  return g;
}

inline LayerGraph to_graph(const MlpNet& net) {
  LayerGraph g;
  g.input_features = net.input_features;
  for (std::size_t i = 0; i < net.hidden.size(); ++i)
    g.stages.push_back({"hidden" + std::to_string(i + 1), net.hidden[i], std::nullopt});
  g.stages.push_back({"classifier", net.classifier, std::nullopt});
  validate(g);
  return g;
}

// -- whole-network forward ------------------------------------------------------

/// Input frames that influence one output column.
inline std::size_t receptive_field(const LayerGraph& g) {
  std::size_t rf = 1;
  for (auto it = g.stages.rbegin(); it != g.stages.rend(); ++it)
    rf = (rf - 1) * it->conv.stride + it->conv.kernel;
  return rf;
}

/// Product of all strides: input frames per output column.
inline std::size_t total_stride(const LayerGraph& g) {
  std::size_t s = 1;
  for (const auto& st : g.stages) s *= st.conv.stride;
  return s;
}

inline std::size_t receptive_field(const LiCoNet& net) { return receptive_field(to_graph(net)); }
inline std::size_t receptive_field(const MlpNet& net) { return receptive_field(to_graph(net)); }

inline Tensor2D network_forward(const LayerGraph& g, const Tensor2D& x) {
  validate(g);
  require(x.channels() == g.input_features, ErrorKind::kShape,
          "network expects " + std::to_string(g.input_features) + " features, got " + std::to_string(x.channels()));
  const std::size_t rf = receptive_field(g);
  require(x.frames() >= rf, ErrorKind::kShape,
          "network needs at least " + std::to_string(rf) + " frames, got " + std::to_string(x.frames()));
  std::vector<Tensor2D> inputs;
  inputs.reserve(g.stages.size());
  Tensor2D cur = x;
  for (const Stage& st : g.stages) {
    inputs.push_back(cur);
    Tensor2D y = conv1d_forward(cur, st.conv);
    if (st.residual_from) {
      const Tensor2D& res = inputs[*st.residual_from];
      const std::size_t offset = res.frames() - y.frames();
      for (std::size_t c = 0; c < y.channels(); ++c)
        for (std::size_t i = 0; i < y.frames(); ++i) y(c, i) += res(c, i + offset);
    }
    cur = std::move(y);
  }
  return cur;
}

inline Tensor2D network_forward(const LiCoNet& net, const Tensor2D& x) { return network_forward(to_graph(net), x); }
inline Tensor2D network_forward(const MlpNet& net, const Tensor2D& x) { return network_forward(to_graph(net), x); }

/// Per-stage input column observed when the network has only ever seen
/// all-zero input. Stage 0 rests at zero; deeper stages rest at the constant
/// response of the layers below.
inline std::vector<std::vector<float>> rest_inputs(const LayerGraph& g) {
  std::vector<std::vector<float>> rest;
  rest.reserve(g.stages.size());
  std::vector<float> z(g.input_features, 0.0f);
  for (const Stage& st : g.stages) {
    rest.push_back(z);
    const Tensor2D y = conv1d_forward(Tensor2D::repeat_column(z, st.conv.kernel), st.conv);
    std::vector<float> next = y.column(0);
    if (st.residual_from)
      for (std::size_t c = 0; c < next.size(); ++c) next[c] += rest[*st.residual_from][c];
    z = std::move(next);
  }
  return rest;
}

}  // namespace lico

#endif  // LICO_MODEL_HPP_
