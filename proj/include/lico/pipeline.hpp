#ifndef LICO_PIPELINE_HPP_
#define LICO_PIPELINE_HPP_

#include <cstddef>
#include <utility>
#include <vector>

#include "lico/conv.hpp"
#include "lico/model.hpp"

namespace lico {

/// Chunked streaming evaluation of a whole LayerGraph, one StreamState per
/// layer. Concatenated step outputs equal network_forward over the input
/// left-padded with receptive_field - total_stride zero frames.
class StreamingPipeline {
 public:
  StreamingPipeline(LayerGraph graph, std::size_t chunk_size) : graph_(std::move(graph)) {
    validate(graph_);
    rest_ = rest_inputs(graph_);
    std::size_t t = chunk_size;
    for (const Stage& st : graph_.stages) {
      require(t >= 1 && t % st.conv.stride == 0, ErrorKind::kConfig,
              st.name + ": chunk of " + std::to_string(t) + " frames is not a multiple of stride " +
                  std::to_string(st.conv.stride));
      states_.push_back(stream_state_init(st.conv, t));
      t /= st.conv.stride;
    }
    reset();
  }

  const LayerGraph& graph() const noexcept { return graph_; }
  std::size_t chunk_size() const noexcept { return states_.front().chunk_size; }
  const std::vector<StreamState>& states() const noexcept { return states_; }

  void reset() {
    for (std::size_t l = 0; l < states_.size(); ++l)
      states_[l].history = Tensor2D::repeat_column(rest_[l], states_[l].history.frames());
  }

  /// Returns n_classes x (chunk_size / total_stride) logits.
  Tensor2D step(const Tensor2D& chunk) {
    std::vector<Tensor2D> inputs;
    inputs.reserve(graph_.stages.size());
    Tensor2D cur = chunk;
    for (std::size_t l = 0; l < graph_.stages.size(); ++l) {
      const Stage& st = graph_.stages[l];
      inputs.push_back(cur);
      Tensor2D y = stream_step(st.conv, states_[l], cur);
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

  /// Streams `x` (frames must be a multiple of the chunk size) from a fresh state.
  Tensor2D run(const Tensor2D& x) {
    require(x.frames() % chunk_size() == 0, ErrorKind::kShape, "stream length is not a whole number of chunks");
    reset();
    Tensor2D out;
    for (std::size_t f = 0; f < x.frames(); f += chunk_size())
      out = concat_frames(out, step(x.slice_frames(f, f + chunk_size())));
    return out;
  }

 private:
  LayerGraph graph_;
  std::vector<std::vector<float>> rest_;
  std::vector<StreamState> states_;
};

/// Zero left context the batch path needs to line up with a fresh pipeline.
inline std::ptrdiff_t streaming_left_pad(const LayerGraph& g) {
  return static_cast<std::ptrdiff_t>(receptive_field(g)) - static_cast<std::ptrdiff_t>(total_stride(g));
}

}  // namespace lico

#endif  // LICO_PIPELINE_HPP_
