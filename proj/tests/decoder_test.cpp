#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lico/decoder.hpp"

namespace lico {
namespace {

PosteriorFrame frame(std::vector<double> p, std::size_t t = 0) { return {t, std::move(p)}; }

// Runs a per-class stream through smooth_posteriors with the full history.
std::vector<double> smooth_stream(const std::vector<double>& xs, std::size_t len) {
  std::vector<PosteriorFrame> hist;
  std::vector<double> out;
  for (double x : xs) {
    out.push_back(smooth_posteriors(hist, frame({x}), len).probs[0]);
    hist.push_back(frame({x}));
  }
  return out;
}

TEST(SmoothPosteriors, Examples) {
  EXPECT_EQ(smooth_stream({0.3, 0.3, 0.3, 0.3}, 3), (std::vector<double>{0.3, 0.3, 0.3, 0.3}));
  EXPECT_EQ(smooth_stream({0.1, 0.9, 0.4}, 1), (std::vector<double>{0.1, 0.9, 0.4}));
  EXPECT_EQ(smooth_stream({1.0, 0.0, 0.0, 0.0}, 2), (std::vector<double>{1.0, 0.5, 0.0, 0.0}));
  const auto partial = smooth_stream({0.2, 0.4, 0.9}, 10);
  EXPECT_DOUBLE_EQ(partial[1], 0.3);
  EXPECT_DOUBLE_EQ(partial[2], 0.5);
  EXPECT_THROW(smooth_posteriors({}, frame({1.0}), 0), Error);
}

DecoderConfig nine_keywords() { return default_decoder_config(11, 1); }

TEST(DecoderConfig, Defaults) {
  const DecoderConfig c = nine_keywords();
  EXPECT_EQ(c.window_steps, 110u);
  EXPECT_EQ(c.smoothing_steps, 10u);
  EXPECT_EQ(c.keyword_ids, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8}));
  const DecoderConfig s3 = default_decoder_config(11, 3);
  EXPECT_EQ(s3.window_steps, 36u);
  EXPECT_EQ(s3.smoothing_steps, 3u);
  EXPECT_NO_THROW(validate(c, 11));
  DecoderConfig bad = c;
  bad.keyword_ids.push_back(9);
  EXPECT_THROW(validate(bad, 11), Error);
}

TEST(DetectionScore, Examples) {
  const DecoderConfig cfg = nine_keywords();
  std::vector<PosteriorFrame> win;
  for (std::size_t m = 0; m < 9; ++m) {
    std::vector<double> p(11, 0.0);
    p[m] = 1.0;
    win.push_back(frame(p));
  }
  EXPECT_DOUBLE_EQ(detection_score(win, cfg), 1.0);

  for (auto& f : win) f.probs[4] = 0.0;
  EXPECT_EQ(detection_score(win, cfg), 0.0);

  std::vector<double> p(11, 1.0);
  p[2] = 0.8;
  p[7] = 0.2;
  EXPECT_NEAR(detection_score(std::vector<PosteriorFrame>{frame(p)}, cfg), std::pow(0.8 * 0.2, 1.0 / 9.0), 1e-12);
}

TEST(DetectionScore, MonotoneAndBounded) {
  const DecoderConfig cfg = nine_keywords();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<PosteriorFrame> win(1 + rng() % 20);
    for (auto& f : win) {
      f.probs.resize(11);
      for (auto& v : f.probs) v = u(rng);
    }
    const double before = detection_score(win, cfg);
    ASSERT_GE(before, 0.0);
    ASSERT_LE(before, 1.0);
    auto& v = win[rng() % win.size()].probs[rng() % 11];
    v = v + (1.0 - v) * u(rng);
    ASSERT_GE(detection_score(win, cfg), before);
  }
}

std::vector<float> logits_for(std::size_t hot, float strength) {
  std::vector<float> l(11, 0.0f);
  l[hot] = strength;
  return l;
}

TEST(KeywordDecoder, ThresholdAboveOneNeverFires) {
  DecoderConfig cfg = nine_keywords();
  cfg.threshold = 1.1;
  KeywordDecoder dec(cfg);
  std::mt19937_64 rng(2);
  for (int j = 0; j < 2000; ++j) {
    const auto r = dec.push(logits_for(rng() % 11, 30.0f));
    EXPECT_FALSE(r.event);
    EXPECT_LE(r.score, 1.0);
  }
}

// Subword 0 early, the other eight twelve steps later: the score crosses at
// step 29, dips when subword 0 leaves the window, and crosses again at step 31
// inside the refractory period. A full sweep after the window fires again.
TEST(KeywordDecoder, RefractoryAfterEvent) {
  DecoderConfig cfg = nine_keywords();
  cfg.smoothing_steps = 1;
  cfg.window_steps = 20;
  cfg.threshold = 0.9;
  KeywordDecoder dec(cfg);
  std::vector<std::size_t> events;
  std::vector<double> scores;
  auto feed = [&](std::size_t cls, int n) {
    for (int i = 0; i < n; ++i) {
      const auto r = dec.push(logits_for(cls, 40.0f));
      scores.push_back(r.score);
      if (r.event) events.push_back(r.event->timestamp);
    }
  };
  feed(9, 10);
  feed(0, 1);
  feed(9, 11);
  for (std::size_t m = 1; m < 9; ++m) feed(m, 1);
  feed(9, 1);
  feed(0, 1);
  ASSERT_EQ(scores.size(), 32u);
  EXPECT_GE(scores[29], 0.9);
  EXPECT_LT(scores[30], 0.9);
  EXPECT_GE(scores[31], 0.9);
  EXPECT_EQ(events, (std::vector<std::size_t>{29}));

  feed(9, 40);
  for (std::size_t m = 0; m < 9; ++m) feed(m, 1);
  EXPECT_EQ(events, (std::vector<std::size_t>{29, 80}));

  dec.reset();
  events.clear();
  for (std::size_t m = 0; m < 9; ++m) feed(m, 1);
  EXPECT_EQ(events, (std::vector<std::size_t>{8}));
}

TEST(Softmax, SumsToOne) {
  const auto p = softmax(std::vector<float>{1000.0f, 0.0f, -3.0f});
  double s = 0.0;
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

}  // namespace
}  // namespace lico
