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

#pragma once

#include <supdict/dict_learn.hpp>
#include <supdict/imageproc.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace supdict {

/// Pixels within this distance of the border are excluded from PSNR.
inline constexpr int kDefaultMetricMargin = 13;

/// W b~ + D_s a*(b, D_b), in model units.
inline Vector predict_patch(const Model& model, const Vector& blurry, const Vector& blurry_denoised,
                            const LassoOptions& lasso = {}) {
  if (blurry.size() != model.blurry_dim() || blurry_denoised.size() != model.blurry_dim())
    throw InvalidInput("predict_patch: patch length does not match the model");
  const SparseCode code = lasso_solve(blurry, model.dict_blurry, model.lambda, lasso);
  return model.linear * blurry_denoised + model.dict_sharp * code.coefficients;
}

/// The same model with D_s zeroed: the pure linear predictor.
inline Model linear_only(Model model) {
  model.dict_sharp.setZero();
  return model;
}

struct DeblurOptions {
  Denoiser denoiser;
  int stride = 1;
  LassoOptions lasso;
};

/// Restores `blurry` by predicting the sharp m_s x m_s patch at every
/// center whose m_b x m_b window fits in the image and averaging the
/// overlapping predictions. Border pixels no prediction reaches are copied
/// from the denoised input. `coverage` receives prediction counts.
inline Image deblur(const Model& model, const Image& blurry, const DeblurOptions& opts = {},
                    Image* coverage = nullptr) {
  model.validate();
  if (blurry.width() < model.patch_size_blurry || blurry.height() < model.patch_size_blurry)
    throw InvalidInput("deblur: image smaller than the blurry patch size");
  if (!blurry.is_finite()) throw InvalidInput("deblur: non-finite pixels");
  const double scale = model.intensity_scale;
  const Image denoised = denoise(blurry, opts.denoiser);
  const Image b_scaled = scaled(blurry, scale), d_scaled = scaled(denoised, scale);
  const std::vector<PixelCoord> centers =
      patch_centers(blurry.width(), blurry.height(), model.patch_size_blurry, opts.stride);

  const bool use_dict = !model.dict_sharp.isZero(0.0);
  const LassoSolver solver(model.dict_blurry, model.lambda, opts.lasso);
  PatchAccumulator acc(blurry.width(), blurry.height(), model.patch_size_sharp);
  const Index mb = model.blurry_dim();
  constexpr size_t chunk = 1024;
  Matrix xb(mb, static_cast<Index>(chunk)), xd(mb, static_cast<Index>(chunk));
  for (size_t start = 0; start < centers.size(); start += chunk) {
    const Index len = static_cast<Index>(std::min(chunk, centers.size() - start));
    for (Index i = 0; i < len; ++i) {
      read_patch(b_scaled, centers[start + static_cast<size_t>(i)], model.patch_size_blurry, xb.col(i));
      read_patch(d_scaled, centers[start + static_cast<size_t>(i)], model.patch_size_blurry, xd.col(i));
    }
    Matrix pred = model.linear * xd.leftCols(len);
    if (use_dict) {
      const Matrix corr = model.dict_blurry.transpose() * xb.leftCols(len);
      for (Index i = 0; i < len; ++i) {
        const SparseCode code = solver.solve_from_correlation(corr.col(i));
        for (Index j : code.active_set) pred.col(i) += model.dict_sharp.col(j) * code.coefficients[j];
      }
    }
    for (Index i = 0; i < len; ++i) acc.add(pred.col(i), centers[start + static_cast<size_t>(i)]);
  }
  if (coverage) *coverage = acc.coverage();
  return scaled(acc.finish(d_scaled), 1.0 / scale);
}

/// Digital zoom: bicubic upsampling followed by deblurring.
inline Image zoom(const Model& model, const Image& low, int factor, const DeblurOptions& opts = {}) {
  if (factor < 2) throw InvalidInput("zoom: factor must be >= 2");
  return deblur(model, upsample_bicubic(low, factor), opts);
}

// ---------------------------------------------------------------------------
// Metrics

/// 10 log10(255^2 / MSE) over pixels at least `margin` away from every
/// border. Identical images give +infinity.
inline double psnr(const Image& reference, const Image& test, int margin = kDefaultMetricMargin) {
  if (!reference.same_shape(test)) throw InvalidInput("psnr: images differ in size");
  if (margin < 0) throw InvalidInput("psnr: margin must be non-negative");
  if (2 * margin >= reference.width() || 2 * margin >= reference.height())
    throw InvalidInput("psnr: margin leaves no pixels");
  double sse = 0.0;
  Index count = 0;
  for (int y = margin; y < reference.height() - margin; ++y)
    for (int x = margin; x < reference.width() - margin; ++x) {
      const double d = reference(x, y) - test(x, y);
      sse += d * d;
      ++count;
    }
  const double mse = sse / static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

/// PSNR gain of `restored` over `degraded` against the same reference.
inline double isnr(const Image& reference, const Image& degraded, const Image& restored,
                   int margin = kDefaultMetricMargin) {
  if (!degraded.same_shape(restored)) throw InvalidInput("isnr: images differ in size");
  const double out = psnr(reference, restored, margin);
  const double in = psnr(reference, degraded, margin);
  if (std::isinf(out) && std::isinf(in)) return 0.0;
  return out - in;
}

struct RestorationReport {
  double psnr_input = 0.0;
  double psnr_output = 0.0;
  double isnr = 0.0;
  int border_margin = kDefaultMetricMargin;
  double runtime = 0.0;  // seconds
};

inline RestorationReport make_report(const Image& reference, const Image& degraded, const Image& restored,
                                     int margin = kDefaultMetricMargin, double runtime = 0.0) {
  RestorationReport r;
  r.psnr_input = psnr(reference, degraded, margin);
  r.psnr_output = psnr(reference, restored, margin);
  r.isnr = isnr(reference, degraded, restored, margin);
  r.border_margin = margin;
  r.runtime = runtime;
  return r;
}

/// "key: value" lines.
inline std::string to_text(const RestorationReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "psnr_input: " << r.psnr_input << '\n'
     << "psnr_output: " << r.psnr_output << '\n'
     << "isnr: " << r.isnr << '\n'
     << "border_margin: " << r.border_margin << '\n'
     << "runtime: " << r.runtime << '\n';
  return os.str();
}

}  // namespace supdict
