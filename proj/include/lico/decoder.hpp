#ifndef LICO_DECODER_HPP_
#define LICO_DECODER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lico/error.hpp"

namespace lico {

struct PosteriorFrame {
  std::size_t timestamp = 0;  // inference step index
  std::vector<double> probs;
};

struct DetectionEvent {
  std::size_t timestamp = 0;  // step at which the score crossed the threshold
  double score = 0.0;

  friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

struct DecoderConfig {
  std::size_t window_steps = 110;
  std::size_t smoothing_steps = 10;
  std::vector<std::size_t> keyword_ids;
  double threshold = 0.5;

  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

/// 1.1 s window and 100 ms smoothing at 10 ms frames, expressed in inference
/// steps of `first_stride` frames. With 11 classes the keyword subwords are
/// ids 0..8 and SIL/FILLER are 9 and 10; in general the last two classes are
/// the non-keyword ones.
inline DecoderConfig default_decoder_config(std::size_t n_classes, std::size_t first_stride) {
  require(n_classes >= 1 && first_stride >= 1, ErrorKind::kConfig, "decoder needs classes and a stride");
  DecoderConfig cfg;
  cfg.window_steps = std::max<std::size_t>(1, 110 / first_stride);
  cfg.smoothing_steps = std::max<std::size_t>(1, 10 / first_stride);
  const std::size_t n_keywords = n_classes >= 3 ? n_classes - 2 : 1;
  for (std::size_t i = 0; i < n_keywords; ++i) cfg.keyword_ids.push_back(i);
  return cfg;
}

inline void validate(const DecoderConfig& cfg, std::size_t n_classes) {
  require(cfg.smoothing_steps >= 1 && cfg.window_steps >= cfg.smoothing_steps, ErrorKind::kConfig,
          "decoder needs window >= smoothing >= 1");
  require(!cfg.keyword_ids.empty(), ErrorKind::kConfig, "decoder needs keyword classes");
  std::vector<std::size_t> ids = cfg.keyword_ids;
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorKind::kConfig, "duplicate keyword id");
  const std::size_t limit = n_classes >= 3 ? n_classes - 2 : n_classes;
  for (std::size_t id : ids)
    require(id < limit, ErrorKind::kConfig, "keyword id " + std::to_string(id) + " collides with SIL/FILLER or is out of range");
}

inline std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] = std::exp(logits[i] - m);
  for (auto& v : p) v /= sum;
  return p;
}

/// Per-class mean over the newest min(len, available) frames, `incoming`
/// included. `history` is oldest first.
inline PosteriorFrame smooth_posteriors(std::span<const PosteriorFrame> history, const PosteriorFrame& incoming,
                                        std::size_t len) {
  require(len >= 1, ErrorKind::kConfig, "smoothing length must be >= 1");
  PosteriorFrame out{incoming.timestamp, incoming.probs};
  const std::size_t from_history = std::min(len - 1, history.size());
  for (std::size_t j = history.size() - from_history; j < history.size(); ++j) {
    require(history[j].probs.size() == out.probs.size(), ErrorKind::kShape, "posterior width mismatch");
    for (std::size_t c = 0; c < out.probs.size(); ++c) out.probs[c] += history[j].probs[c];
  }
  const double n = static_cast<double>(from_history + 1);
  for (auto& v : out.probs) v /= n;
  return out;
}

/// Geometric mean over keyword classes of each class's maximum smoothed
/// posterior inside the window.
inline double detection_score(std::span<const PosteriorFrame> window, const DecoderConfig& cfg) {
  require(!window.empty(), ErrorKind::kShape, "empty detection window");
  double log_sum = 0.0;
  for (std::size_t id : cfg.keyword_ids) {
    double best = 0.0;
    for (const auto& f : window) {
      require(id < f.probs.size(), ErrorKind::kShape, "keyword id outside posterior");
      best = std::max(best, f.probs[id]);
    }
    if (best <= 0.0) return 0.0;
    log_sum += std::log(best);
  }
  const double score = std::exp(log_sum / static_cast<double>(cfg.keyword_ids.size()));
  return std::clamp(score, 0.0, 1.0);
}

struct DecodeResult {
  PosteriorFrame posterior;
  PosteriorFrame smoothed;
  double score = 0.0;
  std::optional<DetectionEvent> event;
};

/// Softmax -> smoothing -> sliding-window score. An event fires when the
/// score crosses the threshold upward, then nothing fires for one window.
class KeywordDecoder {
 public:
  explicit KeywordDecoder(DecoderConfig cfg) : cfg_(std::move(cfg)) {}

  const DecoderConfig& config() const noexcept { return cfg_; }

  DecodeResult push(std::span<const float> logits) {
    DecodeResult r;
    r.posterior = {step_, softmax(logits)};
    const std::vector<PosteriorFrame> hist(raw_.begin(), raw_.end());
    r.smoothed = smooth_posteriors(hist, r.posterior, cfg_.smoothing_steps);
    raw_.push_back(r.posterior);
    if (raw_.size() >= cfg_.smoothing_steps) raw_.pop_front();
    smoothed_.push_back(r.smoothed);
    if (smoothed_.size() > cfg_.window_steps) smoothed_.pop_front();
    const std::vector<PosteriorFrame> win(smoothed_.begin(), smoothed_.end());
    r.score = detection_score(win, cfg_);
    const bool crossed = r.score >= cfg_.threshold && prev_score_ < cfg_.threshold;
    const bool refractory = last_event_ && step_ - *last_event_ < cfg_.window_steps;
    if (crossed && !refractory) {
      r.event = DetectionEvent{step_, r.score};
      last_event_ = step_;
    }
    prev_score_ = r.score;
    ++step_;
    return r;
  }

  void reset() {
    raw_.clear();
    smoothed_.clear();
    prev_score_ = 0.0;
    last_event_.reset();
    step_ = 0;
  }

 private:
  DecoderConfig cfg_;
  std::deque<PosteriorFrame> raw_;
  std::deque<PosteriorFrame> smoothed_;
  double prev_score_ = 0.0;
  std::optional<std::size_t> last_event_;
  std::size_t step_ = 0;
};

}  // namespace lico

#endif  // LICO_DECODER_HPP_
