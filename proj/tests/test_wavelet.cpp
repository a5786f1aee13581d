#include <gtest/gtest.h>

#include <cmath>

#include "ignet/rng.hpp"
#include "ignet/wavelet.hpp"

using namespace ignet;

namespace {

template <class T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  Tensor<T> t(std::move(shape));
  Rng rng(seed);
  fill_uniform(t, rng, lo, hi);
  return t;
}

}  // namespace

TEST(Wavelet, ConstantImageHasNoDetail) {
  const float v = 0.37f;
  auto bands = dwt2(TensorF::full({1, 1, 8, 8}, v));
  for (index_t i = 0; i < bands.ll.numel(); ++i) {
    EXPECT_NEAR(bands.ll[i], 2 * v, 1e-6f);
    EXPECT_NEAR(bands.hl[i], 0.0f, 1e-6f);
    EXPECT_NEAR(bands.lh[i], 0.0f, 1e-6f);
    EXPECT_NEAR(bands.hh[i], 0.0f, 1e-6f);
  }
}

TEST(Wavelet, TwoByTwoBlockValues) {
  // [1 2; 3 4] -> ll=5, hl=1, lh=2, hh=0 under the fixed sign convention.
  TensorF x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto b = dwt2(x);
  EXPECT_FLOAT_EQ(b.ll[0], 5.0f);
  EXPECT_FLOAT_EQ(b.hl[0], 1.0f);
  EXPECT_FLOAT_EQ(b.lh[0], 2.0f);
  EXPECT_FLOAT_EQ(b.hh[0], 0.0f);
}

TEST(Wavelet, EnergyPreservationF64) {
  auto x = random_tensor<double>({1, 1, 8, 8}, 7);
  auto b = dwt2(x);
  const double ein = sum_squares(x);
  const double eout = sum_squares(b.ll) + sum_squares(b.hl) + sum_squares(b.lh) +
                      sum_squares(b.hh);
  EXPECT_LT(std::abs(ein - eout) / ein, 1e-12);
}

TEST(Wavelet, PerfectReconstructionBothPrecisions) {
  auto xf = random_tensor<float>({2, 3, 16, 12}, 11);
  EXPECT_LT(max_abs_diff(idwt2(dwt2(xf)), xf), 1e-5);
  auto xd = random_tensor<double>({2, 3, 16, 12}, 12);
  EXPECT_LT(max_abs_diff(idwt2(dwt2(xd)), xd), 1e-12);
}

TEST(Wavelet, ConstantLowBandInverts) {
  const float v = 0.42f;
  SubbandSet<float> b{TensorF::full({1, 1, 4, 4}, 2 * v), TensorF({1, 1, 4, 4}),
                      TensorF({1, 1, 4, 4}), TensorF({1, 1, 4, 4}), 0};
  auto x = idwt2(b);
  for (index_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(x[i], v, 1e-6f);
}

TEST(Wavelet, ForwardOfInverseIsIdentity) {
  SubbandSet<double> b{random_tensor<double>({1, 2, 4, 4}, 21),
                       random_tensor<double>({1, 2, 4, 4}, 22),
                       random_tensor<double>({1, 2, 4, 4}, 23),
                       random_tensor<double>({1, 2, 4, 4}, 24), 0};
  auto b2 = dwt2(idwt2(b));
  EXPECT_LT(max_abs_diff(b2.ll, b.ll), 1e-12);
  EXPECT_LT(max_abs_diff(b2.hl, b.hl), 1e-12);
  EXPECT_LT(max_abs_diff(b2.lh, b.lh), 1e-12);
  EXPECT_LT(max_abs_diff(b2.hh, b.hh), 1e-12);
}

TEST(Wavelet, Linearity) {
  auto x = random_tensor<float>({1, 2, 8, 8}, 31);
  auto y = random_tensor<float>({1, 2, 8, 8}, 32);
  const float a = 1.7f, b = -0.6f;
  TensorF mix({1, 2, 8, 8});
  for (index_t i = 0; i < mix.numel(); ++i) mix[i] = a * x[i] + b * y[i];
  auto bm = dwt2(mix);
  auto bx = dwt2(x);
  auto by = dwt2(y);
  for (index_t i = 0; i < bm.ll.numel(); ++i) {
    EXPECT_NEAR(bm.ll[i], a * bx.ll[i] + b * by.ll[i], 1e-5f);
    EXPECT_NEAR(bm.hh[i], a * bx.hh[i] + b * by.hh[i], 1e-5f);
  }
}

TEST(Wavelet, OddSizeRejected) {
  EXPECT_THROW(dwt2(TensorF({1, 1, 7, 8})), ShapeError);
  EXPECT_THROW(dwt2(TensorF({1, 1, 8, 9})), ShapeError);
}

TEST(Wavelet, SubbandShapeMismatchRejected) {
  SubbandSet<float> b{TensorF({1, 1, 4, 4}), TensorF({1, 1, 4, 4}), TensorF({1, 1, 4, 4}),
                      TensorF({1, 1, 2, 4}), 0};
  EXPECT_THROW(idwt2(b), ShapeError);
}

// Frequency semantics: the lowest nonzero horizontal sine concentrates in
// LL; the alternating checkerboard concentrates in HH.
TEST(Wavelet, FrequencySemantics) {
  const index_t n = 64;
  TensorD sine({1, 1, n, n});
  for (index_t y = 0; y < n; ++y)
    for (index_t x = 0; x < n; ++x)
      sine[y * n + x] = std::sin(2.0 * 3.14159265358979 * static_cast<double>(x) /
                                 static_cast<double>(n));
  auto bs = dwt2(sine);
  const double total = sum_squares(bs.ll) + sum_squares(bs.hl) + sum_squares(bs.lh) +
                       sum_squares(bs.hh);
  EXPECT_GE(sum_squares(bs.ll) / total, 0.95);

  TensorD checker({1, 1, n, n});
  for (index_t y = 0; y < n; ++y)
    for (index_t x = 0; x < n; ++x) checker[y * n + x] = ((x + y) % 2 == 0) ? 1.0 : -1.0;
  auto bc = dwt2(checker);
  const double ctotal = sum_squares(bc.ll) + sum_squares(bc.hl) + sum_squares(bc.lh) +
                        sum_squares(bc.hh);
  EXPECT_GE(sum_squares(bc.hh) / ctotal, 0.99);
}

TEST(Wavelet, BundleRoundTripAndOrdering) {
  SubbandSet<float> b{random_tensor<float>({2, 4, 4, 4}, 41),
                      random_tensor<float>({2, 4, 4, 4}, 42),
                      random_tensor<float>({2, 4, 4, 4}, 43),
                      random_tensor<float>({2, 4, 4, 4}, 44), 1};
  auto hb = bundle_h(b);
  EXPECT_EQ(hb.shape(), (Shape{2, 12, 4, 4}));
  auto parts = unbundle_h(hb);
  EXPECT_EQ(max_abs_diff(parts[0], b.hl), 0.0);
  EXPECT_EQ(max_abs_diff(parts[1], b.lh), 0.0);
  EXPECT_EQ(max_abs_diff(parts[2], b.hh), 0.0);
  // channel 0 of the bundle is channel 0 of HL
  EXPECT_EQ(hb[0], b.hl[0]);
}

TEST(Wavelet, BundleOf32ChannelsGives96) {
  SubbandSet<float> b{TensorF({1, 32, 2, 2}), TensorF({1, 32, 2, 2}), TensorF({1, 32, 2, 2}),
                      TensorF({1, 32, 2, 2}), 0};
  EXPECT_EQ(bundle_h(b).dim(1), 96);
}

TEST(Wavelet, UnbundleRejectsBadChannelCount) {
  EXPECT_THROW(unbundle_h(TensorF({1, 7, 2, 2})), ShapeError);
}

TEST(Wavelet, PadToEven) {
  auto x = random_tensor<float>({1, 1, 128, 128}, 51);
  auto [p0, info0] = pad_to_even(x, 3);
  EXPECT_EQ(p0.shape(), x.shape());  // already divisible by 8

  auto y = random_tensor<float>({1, 1, 127, 123}, 52);
  auto [p1, info1] = pad_to_even(y, 3);
  EXPECT_EQ(p1.dim(2), 128);
  EXPECT_EQ(p1.dim(3), 128);
  EXPECT_EQ(max_abs_diff(crop_to(p1, info1), y), 0.0);
}

TEST(Wavelet, PadReflectsContent) {
  TensorF x({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  auto [p, info] = pad_to_even(x, 1);  // 2x3 -> 2x4
  EXPECT_EQ(p.dim(3), 4);
  // reflected column: src index w-2 = 1
  EXPECT_FLOAT_EQ(p[3], 2.0f);
  EXPECT_FLOAT_EQ(p[7], 5.0f);
}
