#ifndef LICO_FRONTEND_HPP_
#define LICO_FRONTEND_HPP_

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "lico/error.hpp"
#include "lico/tensor.hpp"

namespace lico {

struct FrontendConfig {
  int sample_rate = 16000;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_mels = 40;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
  double log_floor = 1e-10;
  std::vector<float> norm_mean = std::vector<float>(40, 0.0f);
  std::vector<float> norm_std = std::vector<float>(40, 1.0f);

  std::size_t window_samples() const { return static_cast<std::size_t>(std::lround(sample_rate * window_ms / 1000.0)); }
  std::size_t hop_samples() const { return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0)); }
  double upper_hz() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }

  /// Smallest power of two >= window_samples().
  std::size_t fft_size() const {
    std::size_t n = 1;
    while (n < window_samples()) n <<= 1;
    return n;
  }

  friend bool operator==(const FrontendConfig&, const FrontendConfig&) = default;
};

inline void validate(const FrontendConfig& cfg) {
  require(cfg.sample_rate > 0 && cfg.n_mels >= 1, ErrorKind::kConfig, "frontend rate and band count must be positive");
  require(cfg.window_samples() >= 2 && cfg.hop_samples() >= 1 && cfg.hop_samples() <= cfg.window_samples(),
          ErrorKind::kConfig, "frontend window/hop invalid");
  require(cfg.fmin >= 0.0 && cfg.fmin < cfg.upper_hz() && cfg.upper_hz() <= cfg.sample_rate / 2.0, ErrorKind::kConfig,
          "mel range invalid");
  require(cfg.log_floor > 0.0, ErrorKind::kConfig, "log floor must be positive");
  require(cfg.norm_mean.size() == cfg.n_mels && cfg.norm_std.size() == cfg.n_mels, ErrorKind::kConfig,
          "normalization vectors must have n_mels entries");
  for (float s : cfg.norm_std) require(s > 0.0f, ErrorKind::kConfig, "normalization std must be positive");
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// n_mels + 2 band edges equally spaced on the HTK mel scale, in Hz.
inline std::vector<double> mel_edges_hz(const FrontendConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.upper_hz());
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  return edges;
}

inline std::vector<double> mel_band_centers(const FrontendConfig& cfg) {
  const auto edges = mel_edges_hz(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

/// Hann window, power spectrum, triangular HTK mel filterbank. Owns its FFTW plan.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(FrontendConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    n_fft_ = cfg_.fft_size();
    const std::size_t win = cfg_.window_samples();
    window_.resize(win);
    for (std::size_t n = 0; n < win; ++n)
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win));
    in_.reset(fftw_alloc_real(n_fft_));
    out_.reset(fftw_alloc_complex(n_fft_ / 2 + 1));
    plan_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n_fft_), in_.get(), out_.get(), FFTW_ESTIMATE));
    require(plan_ != nullptr, ErrorKind::kConfig, "could not create FFT plan");
    build_filterbank();
  }

  const FrontendConfig& config() const noexcept { return cfg_; }

  /// Mel band energies before the log.
  std::vector<double> mel_energies(std::span<const float> samples) {
    require(samples.size() == cfg_.window_samples(), ErrorKind::kShape,
            "frame needs " + std::to_string(cfg_.window_samples()) + " samples, got " + std::to_string(samples.size()));
    for (std::size_t n = 0; n < n_fft_; ++n) in_.get()[n] = n < samples.size() ? samples[n] * window_[n] : 0.0;
    fftw_execute(plan_.get());
    std::vector<double> power(n_fft_ / 2 + 1);
    for (std::size_t k = 0; k < power.size(); ++k) {
      const double re = out_.get()[k][0];
      const double im = out_.get()[k][1];
      power[k] = re * re + im * im;
    }
    std::vector<double> energies(cfg_.n_mels, 0.0);
    for (std::size_t m = 0; m < cfg_.n_mels; ++m) {
      const auto& f = filters_[m];
      for (std::size_t j = 0; j < f.weights.size(); ++j) energies[m] += f.weights[j] * power[f.first_bin + j];
    }
    return energies;
  }

  std::vector<float> logmel(std::span<const float> samples) {
    const auto e = mel_energies(samples);
    std::vector<float> out(e.size());
    for (std::size_t m = 0; m < e.size(); ++m) out[m] = static_cast<float>(std::log(e[m] + cfg_.log_floor));
    return out;
  }

 private:
  struct Filter {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };

  struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
  };
  struct PlanFree {
    void operator()(fftw_plan p) const noexcept { fftw_destroy_plan(p); }
  };

  void build_filterbank() {
    const auto edges = mel_edges_hz(cfg_);
    const std::size_t bins = n_fft_ / 2 + 1;
    const double bin_hz = static_cast<double>(cfg_.sample_rate) / static_cast<double>(n_fft_);
    filters_.resize(cfg_.n_mels);
    for (std::size_t m = 0; m < cfg_.n_mels; ++m) {
      const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      Filter& f = filters_[m];
      bool started = false;
      for (std::size_t k = 0; k < bins; ++k) {
        const double hz = static_cast<double>(k) * bin_hz;
        double w = 0.0;
        if (hz > lo && hz <= mid) w = (hz - lo) / (mid - lo);
        else if (hz > mid && hz < hi) w = (hi - hz) / (hi - mid);
        if (w > 0.0) {
          if (!started) {
            f.first_bin = k;
            started = true;
          }
          f.weights.resize(k - f.first_bin + 1, 0.0);
          f.weights.back() = w;
        }
      }
    }
  }

  FrontendConfig cfg_;
  std::size_t n_fft_ = 0;
  std::vector<double> window_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanFree> plan_;
  std::vector<Filter> filters_;
};

inline std::vector<float> compute_logmel_frame(std::span<const float> samples, const FrontendConfig& cfg) {
  LogMelExtractor ex(cfg);
  return ex.logmel(samples);
}

inline std::vector<float> normalize(std::span<const float> frame, const FrontendConfig& cfg) {
  require(frame.size() == cfg.n_mels, ErrorKind::kShape, "frame has wrong band count");
  std::vector<float> out(frame.size());
  for (std::size_t m = 0; m < frame.size(); ++m) out[m] = (frame[m] - cfg.norm_mean[m]) / cfg.norm_std[m];
  return out;
}

inline std::vector<float> denormalize(std::span<const float> frame, const FrontendConfig& cfg) {
  require(frame.size() == cfg.n_mels, ErrorKind::kShape, "frame has wrong band count");
  std::vector<float> out(frame.size());
  for (std::size_t m = 0; m < frame.size(); ++m) out[m] = frame[m] * cfg.norm_std[m] + cfg.norm_mean[m];
  return out;
}

inline float pcm16_to_float(std::int16_t v) noexcept { return static_cast<float>(v) / 32768.0f; }

/// Emits one normalized frame per hop once a full window has accumulated.
/// Only the last window - hop samples are carried between calls.
class FeatureStreamer {
 public:
  explicit FeatureStreamer(FrontendConfig cfg) : extractor_(std::move(cfg)) {}

  const FrontendConfig& config() const noexcept { return extractor_.config(); }

  std::vector<std::vector<float>> push(std::span<const float> samples) {
    std::vector<std::vector<float>> frames;
    const std::size_t win = config().window_samples();
    const std::size_t hop = config().hop_samples();
    buffer_.insert(buffer_.end(), samples.begin(), samples.end());
    std::size_t start = 0;
    while (buffer_.size() - start >= win) {
      frames.push_back(normalize(extractor_.logmel(std::span<const float>(buffer_).subspan(start, win)), config()));
      start += hop;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start));
    return frames;
  }

  std::vector<std::vector<float>> push_pcm16(std::span<const std::int16_t> pcm) {
    std::vector<float> f(pcm.size());
    for (std::size_t i = 0; i < pcm.size(); ++i) f[i] = pcm16_to_float(pcm[i]);
    return push(f);
  }

  void reset() { buffer_.clear(); }

 private:
  LogMelExtractor extractor_;
  std::vector<float> buffer_;
};

/// Whole-signal convenience: features as an n_mels x frames tensor.
inline Tensor2D stream_features(std::span<const float> samples, const FrontendConfig& cfg) {
  FeatureStreamer fs(cfg);
  const auto frames = fs.push(samples);
  Tensor2D out(cfg.n_mels, frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    for (std::size_t m = 0; m < cfg.n_mels; ++m) out(m, i) = frames[i][m];
  return out;
}

}  // namespace lico

#endif  // LICO_FRONTEND_HPP_
