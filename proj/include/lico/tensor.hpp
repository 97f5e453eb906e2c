#ifndef LICO_TENSOR_HPP_
#define LICO_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lico/error.hpp"

namespace lico {

/// Dense channels x frames feature map stored channel-major: element (c, i)
/// lives at c * frames + i.
template <typename T>
class BasicTensor2D {
 public:
  using value_type = T;

  BasicTensor2D() = default;

  BasicTensor2D(std::size_t channels, std::size_t frames, T fill = T{})
      : channels_(channels), frames_(frames), data_(channels * frames, fill) {
    require(channels > 0, ErrorKind::kShape, "tensor needs at least one channel");
  }

  BasicTensor2D(std::size_t channels, std::size_t frames, std::vector<T> data)
      : channels_(channels), frames_(frames), data_(std::move(data)) {
    require(channels > 0, ErrorKind::kShape, "tensor needs at least one channel");
    require(data_.size() == channels * frames, ErrorKind::kShape,
            "tensor data length " + std::to_string(data_.size()) + " != " +
                std::to_string(channels) + "x" + std::to_string(frames));
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t c, std::size_t i) noexcept { return data_[c * frames_ + i]; }
  const T& operator()(std::size_t c, std::size_t i) const noexcept {
    return data_[c * frames_ + i];
  }

  std::span<T> row(std::size_t c) noexcept { return {data_.data() + c * frames_, frames_}; }
  std::span<const T> row(std::size_t c) const noexcept {
    return {data_.data() + c * frames_, frames_};
  }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  std::vector<T> column(std::size_t i) const {
    std::vector<T> out(channels_);
    for (std::size_t c = 0; c < channels_; ++c) out[c] = (*this)(c, i);
    return out;
  }

  /// Frames [begin, end) as a new tensor.
  BasicTensor2D slice_frames(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= frames_, ErrorKind::kShape, "frame slice out of range");
    BasicTensor2D out(channels_, end - begin);
    for (std::size_t c = 0; c < channels_; ++c)
      std::copy(row(c).begin() + begin, row(c).begin() + end, out.row(c).begin());
    return out;
  }

  BasicTensor2D last_frames(std::size_t n) const {
    require(n <= frames_, ErrorKind::kShape, "not enough frames");
    return slice_frames(frames_ - n, frames_);
  }

  static BasicTensor2D from_column(std::span<const T> col) {
    return BasicTensor2D(col.size(), 1, std::vector<T>(col.begin(), col.end()));
  }

  /// Tensor whose every frame equals `col`.
  static BasicTensor2D repeat_column(std::span<const T> col, std::size_t frames) {
    BasicTensor2D out(col.size(), frames);
    for (std::size_t c = 0; c < col.size(); ++c) std::fill(out.row(c).begin(), out.row(c).end(), col[c]);
    return out;
  }

  friend bool operator==(const BasicTensor2D&, const BasicTensor2D&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t frames_ = 0;
  std::vector<T> data_;
};

using Tensor2D = BasicTensor2D<float>;

/// [a || b] along the frame axis.
template <typename T>
BasicTensor2D<T> concat_frames(const BasicTensor2D<T>& a, const BasicTensor2D<T>& b) {
  if (a.frames() == 0 && a.channels() == 0) return b;
  require(a.channels() == b.channels(), ErrorKind::kShape, "concat channel mismatch");
  BasicTensor2D<T> out(a.channels(), a.frames() + b.frames());
  for (std::size_t c = 0; c < a.channels(); ++c) {
    auto dst = out.row(c).begin();
    dst = std::copy(a.row(c).begin(), a.row(c).end(), dst);
    std::copy(b.row(c).begin(), b.row(c).end(), dst);
  }
  return out;
}

/// Left-pads with `pad` zero frames; a negative pad drops that many leading frames.
inline Tensor2D pad_left(const Tensor2D& x, std::ptrdiff_t pad) {
  if (pad < 0) return x.slice_frames(static_cast<std::size_t>(-pad), x.frames());
  return concat_frames(Tensor2D(x.channels(), static_cast<std::size_t>(pad)), x);
}

inline bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float f) { return std::isfinite(f); });
}

inline double max_abs_diff(const Tensor2D& a, const Tensor2D& b) {
  require(a.channels() == b.channels() && a.frames() == b.frames(), ErrorKind::kShape,
          "comparing tensors of different shapes");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.values()[i]) - b.values()[i]));
  return m;
}

// -- affine int8 quantization ------------------------------------------------

struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

enum class QuantMode { kSymmetric, kAsymmetric };

inline constexpr std::int32_t kQMin = -128;
inline constexpr std::int32_t kQMax = 127;

inline void validate(const QuantParams& p) {
  require(p.scale > 0.0 && std::isfinite(p.scale), ErrorKind::kInvalidInput,
          "quant scale must be positive");
  require(p.zero_point >= kQMin && p.zero_point <= kQMax, ErrorKind::kInvalidInput,
          "zero point outside int8");
}

/// round-half-away-from-zero, saturating to int8.
inline std::int8_t quantize_value(double v, const QuantParams& p) {
  const double q = std::round(v / p.scale) + p.zero_point;
  return static_cast<std::int8_t>(std::clamp(q, double(kQMin), double(kQMax)));
}

inline double dequantize_value(std::int32_t q, const QuantParams& p) {
  return static_cast<double>(q - p.zero_point) * p.scale;
}

struct QuantTensor {
  BasicTensor2D<std::int8_t> data;
  QuantParams params;
};

inline QuantTensor quantize_affine(const Tensor2D& x, const QuantParams& p) {
  validate(p);
  require(all_finite(x.values()), ErrorKind::kInvalidInput, "non-finite value in quantizer input");
  BasicTensor2D<std::int8_t> q(x.channels(), x.frames());
  for (std::size_t i = 0; i < x.size(); ++i) q.values()[i] = quantize_value(x.values()[i], p);
  return {std::move(q), p};
}

inline Tensor2D dequantize_affine(const QuantTensor& q) {
  Tensor2D x(q.data.channels(), q.data.frames());
  for (std::size_t i = 0; i < x.size(); ++i)
    x.values()[i] = static_cast<float>(dequantize_value(q.data.values()[i], q.params));
  return x;
}

inline QuantParams choose_quant_params(double min_v, double max_v, QuantMode mode) {
  require(std::isfinite(min_v) && std::isfinite(max_v), ErrorKind::kInvalidRange,
          "non-finite range");
  require(min_v <= max_v, ErrorKind::kInvalidRange,
          "min " + std::to_string(min_v) + " > max " + std::to_string(max_v));
  if (mode == QuantMode::kSymmetric) {
    const double a = std::max(std::abs(min_v), std::abs(max_v));
    if (a == 0.0) return {1.0, 0};
    return {a / 127.0, 0};
  }
  const double lo = std::min(min_v, 0.0);
  const double hi = std::max(max_v, 0.0);
  if (hi == lo) return {1.0, 0};
  const double scale = (hi - lo) / 255.0;
  const double zp = std::round(-128.0 - lo / scale);
  return {scale, static_cast<std::int32_t>(std::clamp(zp, double(kQMin), double(kQMax)))};
}

}  // namespace lico

#endif  // LICO_TENSOR_HPP_
