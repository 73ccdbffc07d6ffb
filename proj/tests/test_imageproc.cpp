// Copyright 2026 The supdict Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <supdict/imageproc.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

using namespace supdict;
using supdict_test::random_image;
using supdict_test::random_integer_image;

namespace {

oracle::Vec to_vec(const Image& img) { return {img.pixels().begin(), img.pixels().end()}; }

oracle::Vec row_major(const Matrix& m) {
  oracle::Vec v;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
  return v;
}

double max_abs_diff(const Image& a, const Image& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.pixels()[i] - b.pixels()[i]));
  return d;
}

}  // namespace

TEST(MirrorIndex, HalfSampleSymmetric) {
  EXPECT_EQ(mirror_index(-1, 5), 0);
  EXPECT_EQ(mirror_index(-2, 5), 1);
  EXPECT_EQ(mirror_index(5, 5), 4);
  EXPECT_EQ(mirror_index(6, 5), 3);
  EXPECT_EQ(mirror_index(10, 5), 0);
  EXPECT_EQ(mirror_index(-11, 5), 0);
  EXPECT_EQ(mirror_index(7, 1), 0);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(mirror_index(i, 5), i);
}

TEST(Kernels, UniformIsFlat) {
  const BlurKernel k = make_kernel(kernels::Uniform{9});
  ASSERT_EQ(k.rows(), 9);
  for (Index i = 0; i < k.weights.size(); ++i) EXPECT_DOUBLE_EQ(k.weights(i), 1.0 / 81.0);
}

TEST(Kernels, BinomialWeights) {
  const BlurKernel k = make_kernel(kernels::Binomial{});
  ASSERT_EQ(k.rows(), 5);
  EXPECT_DOUBLE_EQ(k.weights(2, 2), 36.0 / 256.0);
  EXPECT_DOUBLE_EQ(k.weights(0, 0), 1.0 / 256.0);
  EXPECT_DOUBLE_EQ(k.weights(1, 3), 16.0 / 256.0);
  EXPECT_NEAR(k.weights.sum(), 1.0, 1e-15);
}

TEST(Kernels, RationalCenterWeight) {
  const BlurKernel k = make_kernel(kernels::Rational{15});
  double total = 0.0;
  for (int y = -7; y <= 7; ++y)
    for (int x = -7; x <= 7; ++x) total += 1.0 / (1 + x * x + y * y);
  EXPECT_NEAR(k.weights(7, 7), 1.0 / total, 1e-15);
  EXPECT_NEAR(k.weights(7, 8), 0.5 / total, 1e-15);
  EXPECT_NEAR(k.weights(0, 0), (1.0 / 99.0) / total, 1e-15);
}

TEST(Kernels, GaussianSupportAndSymmetry) {
  EXPECT_EQ(gaussian_support(1.0), 9);
  EXPECT_EQ(gaussian_support(2.0), 17);
  const BlurKernel k = make_kernel(kernels::Gaussian{1.0});
  ASSERT_EQ(k.rows(), 9);
  EXPECT_NEAR(k.weights(4, 5) / k.weights(4, 4), std::exp(-0.5), 1e-14);
  EXPECT_TRUE(k.weights.isApprox(k.weights.transpose(), 0.0));
}

TEST(Kernels, SpecParsingRoundTrips) {
  for (std::string s : {"uniform:9", "rational:15", "binomial", "gaussian:2", "gaussian:1.5:7", "file:k.txt"})
    EXPECT_EQ(to_string(parse_kernel_spec(s)), s);
  EXPECT_THROW(parse_kernel_spec("boxcar"), InvalidInput);
  EXPECT_THROW(parse_kernel_spec("uniform:x"), InvalidInput);
  EXPECT_THROW(make_kernel(kernels::Uniform{4}), InvalidInput);
  EXPECT_THROW(make_kernel(kernels::Gaussian{-1.0}), InvalidInput);
}

TEST(Kernels, FromFileIsNormalized) {
  const std::string path = testing::TempDir() + "kernel_3x3.txt";
  {
    std::ofstream out(path);
    out << "# 3x3\n1 2 1\n2 4 2\n\n1 2 1\n";
  }
  const BlurKernel k = make_kernel(kernels::FromFile{path});
  EXPECT_DOUBLE_EQ(k.weights(1, 1), 0.25);
  EXPECT_DOUBLE_EQ(k.weights(0, 0), 1.0 / 16.0);
  std::istringstream ragged("1 2\n3\n");
  EXPECT_THROW(parse_kernel_text(ragged), InvalidInput);
  std::remove(path.c_str());
}

TEST(Convolve, MatchesNaiveOracle) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dim(3, 40);
  int pairs = 0;
  while (pairs < 50) {
    const int w = dim(rng), h = dim(rng);
    std::uniform_int_distribution<int> half_r(0, (std::min(h, 15) - 1) / 2), half_c(0, (std::min(w, 15) - 1) / 2);
    const int kh = 2 * half_r(rng) + 1, kw = 2 * half_c(rng) + 1;
    const Image img = random_image(w, h, rng, -50.0, 300.0);
    BlurKernel k{supdict_test::gaussian_matrix(kh, kw, rng)};
    const Image fast = convolve(img, k);
    const oracle::Vec slow = oracle::naive_convolve(to_vec(img), w, h, row_major(k.weights), kw, kh);
    for (size_t i = 0; i < slow.size(); ++i)
      ASSERT_LE(std::abs(fast.pixels()[i] - slow[i]), 1e-9 * std::max(1.0, std::abs(slow[i])));
    ++pairs;
  }
}

TEST(Convolve, IsTrueConvolution) {
  // A delta reproduces the kernel itself, unflipped around the delta.
  Image delta(21, 21, 0.0);
  delta(10, 10) = 1.0;
  Matrix w = Matrix::Zero(3, 5);
  w(0, 4) = 1.0;  // offset (dy, dx) = (-1, +2)
  w(1, 2) = 2.0;
  const Image out = convolve(delta, BlurKernel{w});
  EXPECT_DOUBLE_EQ(out(12, 9), 1.0);
  EXPECT_DOUBLE_EQ(out(10, 10), 2.0);
  EXPECT_DOUBLE_EQ(out(8, 11), 0.0);
}

TEST(Convolve, LinearAndPreservesConstants) {
  std::mt19937_64 rng(22);
  const Image a = random_image(30, 25, rng), b = random_image(30, 25, rng);
  const BlurKernel k = make_kernel(kernels::Rational{7});
  Image mix(30, 25);
  for (size_t i = 0; i < mix.size(); ++i) mix.pixels()[i] = 2.0 * a.pixels()[i] - 0.5 * b.pixels()[i];
  const Image lhs = convolve(mix, k), ca = convolve(a, k), cb = convolve(b, k);
  for (size_t i = 0; i < mix.size(); ++i)
    EXPECT_NEAR(lhs.pixels()[i], 2.0 * ca.pixels()[i] - 0.5 * cb.pixels()[i], 1e-10);

  const Image flat(19, 17, 42.0);
  const Image blurred = convolve(flat, make_kernel(kernels::Uniform{9}));
  for (double v : blurred.pixels()) EXPECT_NEAR(v, 42.0, 1e-12);

  EXPECT_EQ(convolve(a, BlurKernel{Matrix::Ones(1, 1)}), a);
  EXPECT_THROW(convolve(Image(5, 5), make_kernel(kernels::Uniform{9})), InvalidInput);
}

TEST(Noise, VarianceAndDeterminism) {
  const Image flat(512, 512, 100.0);
  const Image noisy = add_gaussian_noise(flat, 49.0, 7);
  double mean = 0.0, var = 0.0;
  for (double v : noisy.pixels()) mean += v - 100.0;
  mean /= static_cast<double>(noisy.size());
  for (double v : noisy.pixels()) var += (v - 100.0 - mean) * (v - 100.0 - mean);
  var /= static_cast<double>(noisy.size() - 1);
  EXPECT_NEAR(var, 49.0, 0.05 * 49.0);
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_EQ(add_gaussian_noise(flat, 49.0, 7), noisy);
  EXPECT_NE(add_gaussian_noise(flat, 49.0, 8), noisy);
  EXPECT_EQ(add_gaussian_noise(flat, 0.0, 7), flat);
  EXPECT_THROW(add_gaussian_noise(flat, -1.0, 7), InvalidInput);
}

TEST(Noise, NotClipped) {
  const Image black(64, 64, 0.0);
  const Image noisy = add_gaussian_noise(black, 25.0, 3);
  EXPECT_LT(*std::min_element(noisy.pixels().begin(), noisy.pixels().end()), 0.0);
}

TEST(Patches, CenterCountOn64x64) {
  const auto centers = patch_centers(64, 64, 11);
  EXPECT_EQ(centers.size(), 2916u);
  EXPECT_EQ(centers.front(), (PixelCoord{5, 5}));
  EXPECT_EQ(centers.back(), (PixelCoord{58, 58}));
  EXPECT_EQ(patch_centers(64, 64, 11, 2).size(), 27u * 27u);
  EXPECT_THROW(patch_centers(10, 64, 11), InvalidInput);
}

TEST(Patches, ReadPatchIsRowMajor) {
  Image img(9, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) img(x, y) = 10 * y + x;
  Vector p(9);
  read_patch(img, {4, 3}, 3, p.head(9));
  Vector expect(9);
  expect << 23, 24, 25, 33, 34, 35, 43, 44, 45;
  EXPECT_EQ(p, expect);
}

TEST(Patches, ExtractionIsCoLocated) {
  std::mt19937_64 rng(23);
  const Image s = random_integer_image(40, 33, rng), b = random_integer_image(40, 33, rng);
  const Image d = random_integer_image(40, 33, rng);
  std::vector<PixelCoord> centers;
  const PatchPairSet set = extract_patch_pairs(s, b, d, 7, 11, 1, 100, 9, &centers);
  ASSERT_EQ(set.size(), 100);
  ASSERT_EQ(centers.size(), 100u);
  for (Index i = 0; i < set.size(); ++i) {
    const PixelCoord c = centers[static_cast<size_t>(i)];
    EXPECT_EQ(set.sharp(24, i), static_cast<float>(s(c.x, c.y)));
    EXPECT_EQ(set.blurry(60, i), static_cast<float>(b(c.x, c.y)));
    EXPECT_EQ(set.blurry_denoised(60, i), static_cast<float>(d(c.x, c.y)));
    EXPECT_EQ(set.blurry(0, i), static_cast<float>(b(c.x - 5, c.y - 5)));
  }
  // Same seed, same subset; emitted in raster order.
  std::vector<PixelCoord> again;
  extract_patch_pairs(s, b, d, 7, 11, 1, 100, 9, &again);
  EXPECT_EQ(centers, again);
  EXPECT_TRUE(std::is_sorted(centers.begin(), centers.end(), [](PixelCoord a, PixelCoord b) {
    return std::tie(a.y, a.x) < std::tie(b.y, b.x);
  }));
}

TEST(Aggregate, ConstantPatchesGiveConstantImage) {
  const auto centers = patch_centers(20, 20, 7);
  const Matrix patches = Matrix::Constant(49, static_cast<Index>(centers.size()), 3.5);
  const Image out = aggregate_predictions(patches, centers, Image(20, 20, 3.5));
  for (double v : out.pixels()) EXPECT_EQ(v, 3.5);
}

TEST(Aggregate, SinglePatchAndFallback) {
  Vector p(9);
  p << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  Image cov;
  const Image out = aggregate_predictions(p, {{2, 2}}, Image(6, 6, -1.0), &cov);
  EXPECT_EQ(out(1, 1), 1.0);
  EXPECT_EQ(out(3, 1), 3.0);
  EXPECT_EQ(out(2, 3), 8.0);
  EXPECT_EQ(out(5, 5), -1.0);
  EXPECT_EQ(cov(2, 2), 1.0);
  EXPECT_EQ(cov(4, 4), 0.0);
}

TEST(Aggregate, OverlapIsAveraged) {
  Matrix p(9, 2);
  p.col(0).setConstant(1.0);
  p.col(1).setConstant(3.0);
  Image cov;
  const Image out = aggregate_predictions(p, {{1, 1}, {2, 1}}, Image(5, 3, 0.0), &cov);
  EXPECT_EQ(out(0, 1), 1.0);
  EXPECT_EQ(out(1, 1), 2.0);
  EXPECT_EQ(out(2, 1), 2.0);
  EXPECT_EQ(out(3, 1), 3.0);
  EXPECT_EQ(cov(2, 0), 2.0);
  EXPECT_THROW(aggregate_predictions(p, {{0, 1}, {2, 1}}, Image(5, 3)), InvalidInput);
}

TEST(Aggregate, ExtractAggregateRoundTripIsExact) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    const Image img = random_integer_image(31 + trial, 27 + 2 * trial, rng);
    std::vector<PixelCoord> centers;
    const PatchPairSet set = extract_patch_pairs(img, img, img, 7, 11, 1, -1, 0, &centers);
    Image cov;
    const Image back = aggregate_predictions(set.sharp.cast<double>(), centers, Image(img.width(), img.height(), -1.0), &cov);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        if (cov(x, y) > 0) {
          ASSERT_EQ(back(x, y), img(x, y));
        } else {
          ASSERT_EQ(back(x, y), -1.0);
        }
      }
    // Pixels whose every 7x7 neighbourhood center is valid get 49 votes.
    EXPECT_EQ(cov(img.width() / 2, img.height() / 2), 49.0);
    EXPECT_EQ(cov(2, 2), 1.0);
    EXPECT_EQ(cov(1, 5), 0.0);
  }
}

TEST(Resample, KeysMatchesPiecewiseOracle) {
  for (double t = -2.5; t <= 2.5; t += 0.03125) EXPECT_NEAR(keys_cubic(t), oracle::keys(t), 1e-15) << t;
  EXPECT_EQ(keys_cubic(0.0), 1.0);
  EXPECT_EQ(keys_cubic(1.0), 0.0);
  EXPECT_EQ(keys_cubic(2.0), 0.0);
  for (double u = 0.0; u < 1.0; u += 0.1) {
    double sum = 0.0;
    for (int j = -1; j <= 2; ++j) sum += keys_cubic(u - j);
    EXPECT_NEAR(sum, 1.0, 1e-14);
  }
}

TEST(Resample, UpsampleMatchesDirectOracle) {
  // Checkerboard: the worst case for interpolation, checked pixel by pixel
  // against a direct separable sum with mirrored taps.
  Image cb(8, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) cb(x, y) = ((x + y) % 2) * 255.0;
  const int f = 2;
  const Image up = upsample_bicubic(cb, f);
  ASSERT_EQ(up.width(), 16);
  ASSERT_EQ(up.height(), 12);
  auto mirror = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
    return i;
  };
  for (int oy = 0; oy < 12; ++oy)
    for (int ox = 0; ox < 16; ++ox) {
      const double u = (ox + 0.5) / f - 0.5, v = (oy + 0.5) / f - 0.5;
      double acc = 0.0;
      for (int iy = static_cast<int>(std::floor(v)) - 1; iy <= static_cast<int>(std::floor(v)) + 2; ++iy)
        for (int ix = static_cast<int>(std::floor(u)) - 1; ix <= static_cast<int>(std::floor(u)) + 2; ++ix)
          acc += oracle::keys(u - ix) * oracle::keys(v - iy) * cb(mirror(ix, 8), mirror(iy, 6));
      ASSERT_NEAR(up(ox, oy), acc, 1e-10) << ox << "," << oy;
    }
}

TEST(Resample, ConstantsArePreserved) {
  const Image flat(33, 20, 77.0);
  for (double v : upsample_bicubic(flat, 3).pixels()) EXPECT_NEAR(v, 77.0, 1e-12);
  const Image down = downsample_antialias(flat, 2);
  EXPECT_EQ(down.width(), 17);
  EXPECT_EQ(down.height(), 10);
  for (double v : down.pixels()) EXPECT_NEAR(v, 77.0, 1e-12);
}

TEST(Resample, RampSurvivesDownUp) {
  Image ramp(96, 80);
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 96; ++x) ramp(x, y) = 1.5 * x + 0.75 * y;
  const Image back = zoom_degrade(ramp, 2);
  ASSERT_TRUE(back.same_shape(ramp));
  // Mirrored boundaries bend a ramp near the edges; the interior is exact
  // up to the resampling error of a linear function.
  double worst = 0.0;
  for (int y = 8; y < 72; ++y)
    for (int x = 8; x < 88; ++x) worst = std::max(worst, std::abs(back(x, y) - ramp(x, y)));
  EXPECT_LE(worst, 1.0);
}

TEST(Resample, ZoomDegradeKeepsOddSizes) {
  std::mt19937_64 rng(25);
  const Image img = random_image(35, 21, rng);
  EXPECT_TRUE(zoom_degrade(img, 2).same_shape(img));
  EXPECT_TRUE(zoom_degrade(img, 3).same_shape(img));
  EXPECT_THROW(upsample_bicubic(img, 1), InvalidInput);
}

TEST(Denoise, PassthroughAndGaussian) {
  std::mt19937_64 rng(26);
  const Image img = random_image(30, 30, rng);
  EXPECT_EQ(denoise(img, Denoiser::passthrough()), img);
  const Image smooth = denoise(img, parse_denoiser("gaussian:1.5"));
  EXPECT_EQ(smooth, convolve(img, make_kernel(kernels::Gaussian{1.5})));
  EXPECT_EQ(to_string(parse_denoiser("none")), "passthrough");
  EXPECT_EQ(to_string(parse_denoiser("gaussian:1.5")), "gaussian:1.5");
  EXPECT_THROW(parse_denoiser("bm3d"), InvalidInput);
  EXPECT_THROW(parse_denoiser("gaussian:0"), InvalidInput);
  EXPECT_LT(max_abs_diff(smooth, img), 255.0);
}
