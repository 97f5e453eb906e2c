#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lico/tensor.hpp"

namespace lico {
namespace {

Tensor2D row(std::vector<float> v) {
  const std::size_t n = v.size();
  return Tensor2D(1, n, std::move(v));
}

TEST(Tensor2D, ChannelMajorLayout) {
  Tensor2D x(2, 3, std::vector<float>{0, 1, 2, 10, 11, 12});
  EXPECT_EQ(x(1, 0), 10.0f);
  EXPECT_EQ(x(0, 2), 2.0f);
  EXPECT_EQ(x.column(1), (std::vector<float>{1, 11}));
}

TEST(Tensor2D, RejectsBadShapes) {
  EXPECT_THROW(Tensor2D(2, 3, std::vector<float>(5)), Error);
  EXPECT_THROW(Tensor2D(0, 3), Error);
}

TEST(Tensor2D, ConcatAndSlice) {
  Tensor2D a(2, 1, std::vector<float>{1, 2});
  Tensor2D b(2, 2, std::vector<float>{3, 4, 5, 6});
  Tensor2D ab = concat_frames(a, b);
  EXPECT_EQ(ab.values(), (std::vector<float>{1, 3, 4, 2, 5, 6}));
  EXPECT_EQ(ab.last_frames(2), b);
  EXPECT_EQ(concat_frames(Tensor2D{}, b), b);
  EXPECT_EQ(pad_left(b, 1).values(), (std::vector<float>{0, 3, 4, 0, 5, 6}));
  EXPECT_EQ(pad_left(b, -1).values(), (std::vector<float>{4, 6}));
}

TEST(QuantizeAffine, SpecExamples) {
  EXPECT_EQ(quantize_affine(row({0.0f}), {0.1, 5}).data.values()[0], 5);
  EXPECT_EQ(quantize_affine(row({1.0f}), {0.1, 0}).data.values()[0], 10);
  EXPECT_EQ(quantize_affine(row({100.0f}), {0.1, 0}).data.values()[0], 127);
  EXPECT_EQ(quantize_affine(row({-100.0f}), {0.1, 0}).data.values()[0], -128);
}

TEST(QuantizeAffine, RoundsHalfAwayFromZero) {
  EXPECT_EQ(quantize_affine(row({0.5f}), {1.0, 0}).data.values()[0], 1);
  EXPECT_EQ(quantize_affine(row({-0.5f}), {1.0, 0}).data.values()[0], -1);
  EXPECT_EQ(quantize_affine(row({2.5f}), {1.0, 0}).data.values()[0], 3);
}

TEST(QuantizeAffine, RejectsNonFinite) {
  try {
    quantize_affine(row({std::numeric_limits<float>::quiet_NaN()}), {1.0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
  EXPECT_THROW(quantize_affine(row({1.0f}), {0.0, 0}), Error);
}

TEST(DequantizeAffine, SpecExamples) {
  auto dq = [](std::int8_t q, QuantParams p) {
    return dequantize_affine({BasicTensor2D<std::int8_t>(1, 1, std::vector<std::int8_t>{q}), p}).values()[0];
  };
  EXPECT_FLOAT_EQ(dq(5, {0.1, 5}), 0.0f);
  EXPECT_FLOAT_EQ(dq(10, {0.1, 0}), 1.0f);
  EXPECT_FLOAT_EQ(dq(-128, {1.0, 0}), -128.0f);
}

TEST(ChooseQuantParams, SpecExamples) {
  const auto sym = choose_quant_params(-2.0, 2.0, QuantMode::kSymmetric);
  EXPECT_DOUBLE_EQ(sym.scale, 2.0 / 127.0);
  EXPECT_EQ(sym.zero_point, 0);
  EXPECT_EQ(choose_quant_params(0.0, 0.0, QuantMode::kSymmetric), (QuantParams{1.0, 0}));
  const auto asym = choose_quant_params(0.0, 2.55, QuantMode::kAsymmetric);
  EXPECT_NEAR(asym.scale, 0.01, 1e-15);
  EXPECT_EQ(asym.zero_point, -128);
}

TEST(ChooseQuantParams, WidensToIncludeZero) {
  const auto p = choose_quant_params(1.0, 2.0, QuantMode::kAsymmetric);
  EXPECT_NEAR(p.scale, 2.0 / 255.0, 1e-15);
  EXPECT_EQ(quantize_value(0.0, p), -128);
  EXPECT_EQ(dequantize_value(quantize_value(0.0, p), p), 0.0);
}

TEST(ChooseQuantParams, InvalidRange) {
  try {
    choose_quant_params(1.0, -1.0, QuantMode::kAsymmetric);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidRange);
  }
}

// Round trip within scale/2 and idempotence on the lattice, over random
// calibrated ranges in both modes.
TEST(QuantProperties, RoundTripBoundAndIdempotence) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> bound(-50.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    double lo = bound(rng), hi = bound(rng);
    if (lo > hi) std::swap(lo, hi);
    for (auto mode : {QuantMode::kSymmetric, QuantMode::kAsymmetric}) {
      const QuantParams p = choose_quant_params(lo, hi, mode);
      if (mode == QuantMode::kSymmetric) {
        ASSERT_EQ(p.zero_point, 0);
      }
      std::uniform_real_distribution<float> in_range(static_cast<float>(lo), static_cast<float>(hi));
      Tensor2D x(1, 64);
      for (auto& v : x.values()) v = in_range(rng);
      const QuantTensor q = quantize_affine(x, p);
      const Tensor2D back = dequantize_affine(q);
      for (std::size_t i = 0; i < x.size(); ++i)
        ASSERT_LE(std::abs(double(back.values()[i]) - x.values()[i]), p.scale / 2 + 1e-6 * std::abs(x.values()[i]));
      EXPECT_EQ(quantize_affine(back, p).data, q.data);
    }
  }
}

}  // namespace
}  // namespace lico
