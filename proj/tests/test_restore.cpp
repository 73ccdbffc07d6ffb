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

#include <supdict/restore.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace supdict;
using supdict_test::gaussian_matrix;
using supdict_test::random_image;
using supdict_test::random_unit_dictionary;

namespace {

// W copies the central m_s x m_s block of the m_b x m_b window.
Matrix center_selector(int ms, int mb) {
  Matrix w = Matrix::Zero(ms * ms, mb * mb);
  const int off = (mb - ms) / 2;
  for (int y = 0; y < ms; ++y)
    for (int x = 0; x < ms; ++x) w(y * ms + x, (y + off) * mb + x + off) = 1.0;
  return w;
}

Model small_model(std::mt19937_64& rng, int ms = 3, int mb = 5, Index k = 8) {
  Model m;
  m.patch_size_sharp = ms;
  m.patch_size_blurry = mb;
  m.lambda = 0.05;
  m.dict_blurry = random_unit_dictionary(mb * mb, k, rng);
  m.dict_sharp = 0.1 * gaussian_matrix(ms * ms, k, rng);
  m.linear = center_selector(ms, mb) + 0.01 * gaussian_matrix(ms * ms, mb * mb, rng);
  return m;
}

Model identity_model(int ms, int mb, Index k = 4) {
  Model m;
  m.patch_size_sharp = ms;
  m.patch_size_blurry = mb;
  m.lambda = 0.1;
  m.dict_blurry = Matrix::Identity(mb * mb, k);
  m.dict_sharp = Matrix::Zero(ms * ms, k);
  m.linear = center_selector(ms, mb);
  return m;
}

Image offset(const Image& img, double d) {
  Image out = img;
  for (double& v : out.pixels()) v += d;
  return out;
}

}  // namespace

TEST(PredictPatch, LinearPlusDictionaryTerm) {
  std::mt19937_64 rng(51);
  const Model m = small_model(rng);
  const Vector b = supdict_test::gaussian_vector(25, rng), bd = supdict_test::gaussian_vector(25, rng);
  const Vector a = lasso_solve(b, m.dict_blurry, m.lambda).coefficients;
  EXPECT_LE((predict_patch(m, b, bd) - (m.linear * bd + m.dict_sharp * a)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(predict_patch(m, Vector::Zero(9), bd), InvalidInput);
}

TEST(Deblur, LinearOnlyEqualsLinearPipeline) {
  std::mt19937_64 rng(52);
  const Model m = linear_only(small_model(rng));
  const Image img = random_image(23, 19, rng);
  const Image out = deblur(m, img);
  // Same thing spelled out: scale, W times each window, aggregate, unscale.
  const auto centers = patch_centers(23, 19, 5);
  Matrix preds(9, static_cast<Index>(centers.size()));
  Vector window(25);
  for (size_t i = 0; i < centers.size(); ++i) {
    read_patch(img, centers[i], 5, window.head(25));
    preds.col(static_cast<Index>(i)) = m.linear * (window / 255.0);
  }
  const Image expect = scaled(aggregate_predictions(preds, centers, scaled(img, 1.0 / 255.0)), 255.0);
  for (size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.pixels()[i], expect.pixels()[i], 1e-9);
}

TEST(Deblur, CoverageAndBorderFallback) {
  std::mt19937_64 rng(53);
  const Model m = small_model(rng);
  const Image img = random_image(20, 20, rng);
  Image cov;
  const Image out = deblur(m, img, {}, &cov);
  EXPECT_EQ(cov(10, 10), 9.0);
  // Window centers span [2, 17]; sharp patches reach one pixel further.
  EXPECT_EQ(cov(0, 0), 0.0);
  EXPECT_EQ(cov(1, 1), 1.0);
  EXPECT_EQ(cov(2, 2), 4.0);
  EXPECT_EQ(cov(1, 10), 3.0);
  EXPECT_NEAR(out(0, 0), img(0, 0), 1e-12);
  EXPECT_NEAR(out(19, 7), img(19, 7), 1e-12);
}

TEST(Deblur, IdentityModelReproducesInput) {
  std::mt19937_64 rng(54);
  const Image img = random_image(31, 27, rng);
  const Image out = deblur(identity_model(7, 11), img);
  for (size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.pixels()[i], img.pixels()[i], 1e-10);
}

TEST(Deblur, ConstantImageStaysConstant) {
  Model m = identity_model(3, 5);
  m.linear = Matrix::Constant(9, 25, 1.0 / 25.0);
  const Image flat(16, 16, 80.0);
  for (double v : deblur(m, flat).pixels()) EXPECT_NEAR(v, 80.0, 1e-10);
}

TEST(Deblur, DeterministicAndStrideAware) {
  std::mt19937_64 rng(55);
  const Model m = small_model(rng);
  const Image img = random_image(25, 25, rng);
  EXPECT_EQ(deblur(m, img), deblur(m, img));
  DeblurOptions opts;
  opts.stride = 2;
  Image cov;
  deblur(m, img, opts, &cov);
  EXPECT_LE(cov(12, 12), 4.0);
  EXPECT_THROW(deblur(m, Image(4, 30)), InvalidInput);
}

TEST(Zoom, SizeAndIdentityModel) {
  std::mt19937_64 rng(56);
  const Image low = random_image(20, 15, rng);
  const Image z = zoom(identity_model(7, 11), low, 2);
  EXPECT_EQ(z.width(), 40);
  EXPECT_EQ(z.height(), 30);
  const Image up = upsample_bicubic(low, 2);
  for (size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(z.pixels()[i], up.pixels()[i], 1e-10);
  EXPECT_THROW(zoom(identity_model(7, 11), low, 1), InvalidInput);
}

TEST(Psnr, ReferenceValues) {
  std::mt19937_64 rng(57);
  const Image ref = random_image(64, 64, rng);
  EXPECT_TRUE(std::isinf(psnr(ref, ref)));
  EXPECT_NEAR(psnr(ref, offset(ref, 255.0)), 0.0, 1e-12);
  EXPECT_NEAR(psnr(ref, offset(ref, -16.0)), 20.0 * std::log10(255.0 / 16.0), 1e-12);
  // A gain of 1 dB is an MSE ratio of 10^-0.1.
  const double d = 10.0, d1 = d * std::sqrt(std::pow(10.0, -0.1));
  EXPECT_NEAR(psnr(ref, offset(ref, d1)) - psnr(ref, offset(ref, d)), 1.0, 1e-12);
  EXPECT_NEAR(std::pow(10.0, -0.1), 0.794, 5e-4);
}

TEST(Psnr, ExcludesTheBorder) {
  std::mt19937_64 rng(58);
  const Image ref = random_image(40, 40, rng);
  Image test = ref;
  for (int x = 0; x < 40; ++x) test(x, 0) += 50.0;
  test(12, 20) += 50.0;
  EXPECT_TRUE(std::isinf(psnr(ref, test)));
  EXPECT_FALSE(std::isinf(psnr(ref, test, 0)));
  test(13, 20) += 1.0;
  EXPECT_NEAR(psnr(ref, test), 10.0 * std::log10(255.0 * 255.0 * 14.0 * 14.0), 1e-9);
  EXPECT_THROW(psnr(ref, Image(40, 41)), InvalidInput);
  EXPECT_THROW(psnr(ref, ref, 20), InvalidInput);
}

TEST(Isnr, Identities) {
  std::mt19937_64 rng(59);
  const Image ref = random_image(64, 64, rng);
  const Image deg = offset(ref, 8.0), res = offset(ref, 2.0);
  EXPECT_DOUBLE_EQ(isnr(ref, deg, deg), 0.0);
  EXPECT_DOUBLE_EQ(isnr(ref, deg, res), psnr(ref, res) - psnr(ref, deg));
  EXPECT_NEAR(isnr(ref, deg, res), 20.0 * std::log10(4.0), 1e-12);
  EXPECT_EQ(isnr(ref, ref, ref), 0.0);
  const RestorationReport r = make_report(ref, deg, res, kDefaultMetricMargin, 1.5);
  EXPECT_DOUBLE_EQ(r.isnr, r.psnr_output - r.psnr_input);
  const std::string text = to_text(r);
  EXPECT_NE(text.find("isnr: 12.041200\n"), std::string::npos);
  EXPECT_NE(text.find("border_margin: 13\n"), std::string::npos);
  EXPECT_NE(text.find("runtime: 1.500000\n"), std::string::npos);
}
