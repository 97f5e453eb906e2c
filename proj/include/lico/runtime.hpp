#ifndef LICO_RUNTIME_HPP_
#define LICO_RUNTIME_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lico/decoder.hpp"
#include "lico/frontend.hpp"
#include "lico/linearizer.hpp"
#include "lico/model_io.hpp"
#include "lico/pipeline.hpp"
#include "lico/quant.hpp"

namespace lico {

enum class EngineKind { kConv, kLinear, kInt8 };

inline EngineKind parse_engine(std::string_view s) {
  if (s == "conv") return EngineKind::kConv;
  if (s == "linear") return EngineKind::kLinear;
  if (s == "int8") return EngineKind::kInt8;
  fail(ErrorKind::kConfig, "unknown engine '" + std::string(s) + "'");
}

/// Steps chunk_size() feature frames at a time, one logit column out.
class InferenceEngine {
 public:
  virtual ~InferenceEngine() = default;
  virtual Tensor2D step(const Tensor2D& chunk) = 0;
  virtual void reset() = 0;
  virtual std::size_t chunk_size() const = 0;
};

namespace detail {

class ConvEngine final : public InferenceEngine {
 public:
  explicit ConvEngine(const LayerGraph& g) : pipe_(g, g.stages.front().conv.stride) {
    require(total_stride(g) == pipe_.chunk_size(), ErrorKind::kNotLinearizable,
            "streaming engine needs one output column per step");
  }
  Tensor2D step(const Tensor2D& chunk) override { return pipe_.step(chunk); }
  void reset() override { pipe_.reset(); }
  std::size_t chunk_size() const override { return pipe_.chunk_size(); }

 private:
  StreamingPipeline pipe_;
};

class LinearEngineAdapter final : public InferenceEngine {
 public:
  explicit LinearEngineAdapter(LinearizedNet n) : engine_(std::move(n)) {}
  Tensor2D step(const Tensor2D& chunk) override { return engine_.step(chunk); }
  void reset() override { engine_.reset(); }
  std::size_t chunk_size() const override { return engine_.net().chunk_size; }

 private:
  LinearizedEngine engine_;
};

class Int8EngineAdapter final : public InferenceEngine {
 public:
  explicit Int8EngineAdapter(QuantizedNet n) : engine_(std::move(n)) {}
  Tensor2D step(const Tensor2D& chunk) override { return engine_.step(chunk); }
  void reset() override { engine_.reset(); }
  std::size_t chunk_size() const override { return engine_.net().chunk_size; }

 private:
  QuantizedEngine engine_;
};

template <typename Stages>
std::size_t stages_receptive_field(const Stages& stages) {
  std::size_t rf = 1;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) rf = (rf - 1) * it->stride + it->kernel;
  return rf;
}

}  // namespace detail

inline std::size_t receptive_field(const LinearizedNet& n) { return detail::stages_receptive_field(n.stages); }
inline std::size_t receptive_field(const QuantizedNet& n) { return detail::stages_receptive_field(n.stages); }

inline std::size_t model_receptive_field(const ModelBundle& m) {
  return std::visit([](const auto& n) { return receptive_field(n); }, m.net);
}

inline std::size_t model_first_stride(const ModelBundle& m) {
  if (const auto* g = std::get_if<LayerGraph>(&m.net)) return g->stages.front().conv.stride;
  if (const auto* l = std::get_if<LinearizedNet>(&m.net)) return l->chunk_size;
  return std::get<QuantizedNet>(m.net).chunk_size;
}

inline std::unique_ptr<InferenceEngine> make_engine(const ModelBundle& m, EngineKind kind) {
  switch (kind) {
    case EngineKind::kConv:
      if (const auto* g = std::get_if<LayerGraph>(&m.net)) return std::make_unique<detail::ConvEngine>(*g);
      fail(ErrorKind::kConfig, "conv engine needs a float model");
    case EngineKind::kLinear:
      if (const auto* g = std::get_if<LayerGraph>(&m.net))
        return std::make_unique<detail::LinearEngineAdapter>(linearize_network(*g, g->stages.front().conv.stride));
      if (const auto* l = std::get_if<LinearizedNet>(&m.net)) return std::make_unique<detail::LinearEngineAdapter>(*l);
      fail(ErrorKind::kConfig, "linear engine needs a float or linearized model");
    case EngineKind::kInt8:
      if (const auto* q = std::get_if<QuantizedNet>(&m.net)) return std::make_unique<detail::Int8EngineAdapter>(*q);
      fail(ErrorKind::kConfig, "int8 engine needs a quantized model (see `quantize`)");
  }
  fail(ErrorKind::kConfig, "unknown engine");
}

struct StreamOutput {
  PosteriorFrame posterior;  // raw softmax; timestamp is the emitted step index
  double score = 0.0;
  double end_time_sec = 0.0;  // end of the newest audio frame feeding this step
  std::optional<DetectionEvent> event;
};

/// PCM -> features -> inference every first-stride frames -> decoder.
///
/// Steps are aligned so that emitted step j sees feature frames
/// [j*s, j*s + RF); steps whose receptive field would reach before the first
/// frame are computed (to warm the state) but not emitted.
class StreamRunner {
 public:
  StreamRunner(const ModelBundle& model, EngineKind kind, std::optional<double> threshold = std::nullopt)
      : features_(model.frontend), engine_(make_engine(model, kind)), decoder_(model.decoder) {
    if (threshold) {
      DecoderConfig cfg = model.decoder;
      cfg.threshold = *threshold;
      decoder_ = KeywordDecoder(cfg);
    }
    n_features_ = model.input_features();
    stride_ = engine_->chunk_size();
    rf_ = model_receptive_field(model);
    const std::size_t lead = (stride_ - rf_ % stride_) % stride_;
    warmup_steps_ = (rf_ + lead) / stride_ - 1;
    pending_.assign(lead, std::vector<float>(n_features_, 0.0f));
  }

  std::vector<StreamOutput> push(std::span<const float> samples) { return consume(features_.push(samples)); }
  std::vector<StreamOutput> push_pcm16(std::span<const std::int16_t> pcm) { return consume(features_.push_pcm16(pcm)); }

  std::size_t receptive_field() const noexcept { return rf_; }
  std::size_t stride() const noexcept { return stride_; }

 private:
  std::vector<StreamOutput> consume(std::vector<std::vector<float>> frames) {
    std::vector<StreamOutput> out;
    for (auto& f : frames) {
      pending_.push_back(std::move(f));
      if (pending_.size() < stride_) continue;
      Tensor2D chunk(n_features_, stride_);
      for (std::size_t i = 0; i < stride_; ++i)
        for (std::size_t c = 0; c < n_features_; ++c) chunk(c, i) = pending_[i][c];
      pending_.clear();
      const Tensor2D logits = engine_->step(chunk);
      if (steps_++ < warmup_steps_) continue;
      DecodeResult r = decoder_.push(logits.values());
      const FrontendConfig& fc = features_.config();
      const std::size_t newest = emitted_ * stride_ + rf_ - 1;
      StreamOutput o;
      o.posterior = std::move(r.posterior);
      o.score = r.score;
      o.event = r.event;
      o.end_time_sec = static_cast<double>(newest * fc.hop_samples() + fc.window_samples()) / fc.sample_rate;
      out.push_back(std::move(o));
      ++emitted_;
    }
    return out;
  }

  FeatureStreamer features_;
  std::unique_ptr<InferenceEngine> engine_;
  KeywordDecoder decoder_;
  std::size_t n_features_ = 0;
  std::size_t stride_ = 1;
  std::size_t rf_ = 1;
  std::size_t warmup_steps_ = 0;
  std::size_t steps_ = 0;
  std::size_t emitted_ = 0;
  std::vector<std::vector<float>> pending_;
};

inline std::vector<StreamOutput> run_stream(const ModelBundle& model, std::span<const std::int16_t> pcm,
                                            EngineKind kind, std::optional<double> threshold = std::nullopt) {
  StreamRunner runner(model, kind, threshold);
  return runner.push_pcm16(pcm);
}

}  // namespace lico

#endif  // LICO_RUNTIME_HPP_
