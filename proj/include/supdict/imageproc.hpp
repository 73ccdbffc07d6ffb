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

// Pixel-level machinery: degradation (blur + noise), resampling for digital
// zoom, denoising front-ends, and patch extraction / aggregation.
// All boundary handling uses half-sample symmetric extension.

#include <supdict/image.hpp>
#include <supdict/kernel.hpp>
#include <supdict/patches.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace supdict {

/// out[p] = sum_q k[q] * ext(img)[p - q], output the same size as the input.
inline Image convolve(const Image& img, const BlurKernel& k) {
  if (k.rows() > img.height() || k.cols() > img.width())
    throw InvalidInput("convolve: kernel " + std::to_string(k.cols()) + "x" + std::to_string(k.rows()) +
                       " larger than image " + std::to_string(img.width()) + "x" +
                       std::to_string(img.height()));
  const int w = img.width(), h = img.height();
  const int hr = k.half_rows(), hc = k.half_cols();
  // Offsets index the extended image, so p - q with q in [-h, h].
  std::vector<int> xmap(static_cast<size_t>(w + 2 * hc)), ymap(static_cast<size_t>(h + 2 * hr));
  for (int i = 0; i < w + 2 * hc; ++i) xmap[static_cast<size_t>(i)] = mirror_index(i - hc, w);
  for (int i = 0; i < h + 2 * hr; ++i) ymap[static_cast<size_t>(i)] = mirror_index(i - hr, h);

  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int qy = -hr; qy <= hr; ++qy) {
        const int sy = ymap[static_cast<size_t>(y - qy + hr)];
        for (int qx = -hc; qx <= hc; ++qx)
          acc += k.weights(qy + hr, qx + hc) * img(xmap[static_cast<size_t>(x - qx + hc)], sy);
      }
      out(x, y) = acc;
    }
  }
  return out;
}

/// Adds i.i.d. N(0, variance) samples. The result is not clipped.
inline Image add_gaussian_noise(const Image& img, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0)) throw InvalidInput("noise variance must be non-negative");
  Image out = img;
  if (variance == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(variance));
  for (double& v : out.pixels()) v += noise(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

/// Keys cubic convolution kernel with a = -0.5.
inline double keys_cubic(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace detail {

struct CubicTaps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

// Output sample o sits at input coordinate (o + 0.5) * scale - 0.5.
inline std::vector<CubicTaps> cubic_taps(int out_size, int in_size, double scale) {
  std::vector<CubicTaps> taps(static_cast<size_t>(out_size));
  for (int o = 0; o < out_size; ++o) {
    const double u = (o + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(u));
    auto& t = taps[static_cast<size_t>(o)];
    for (int j = 0; j < 4; ++j) {
      const int i = base - 1 + j;
      t.index[static_cast<size_t>(j)] = mirror_index(i, in_size);
      t.weight[static_cast<size_t>(j)] = keys_cubic(u - i);
    }
  }
  return taps;
}

inline Image resample_bicubic(const Image& img, int out_w, int out_h, double scale_x, double scale_y) {
  const auto xt = cubic_taps(out_w, img.width(), scale_x);
  const auto yt = cubic_taps(out_h, img.height(), scale_y);
  Image rows(out_w, img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < out_w; ++x) {
      const auto& t = xt[static_cast<size_t>(x)];
      double acc = 0.0;
      for (size_t j = 0; j < 4; ++j) acc += t.weight[j] * img(t.index[j], y);
      rows(x, y) = acc;
    }
  Image out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const auto& t = yt[static_cast<size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (size_t j = 0; j < 4; ++j) acc += t.weight[j] * rows(x, t.index[j]);
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Antialiasing prefilter width relative to the decimation factor.
inline constexpr double kAntialiasSigmaPerFactor = 0.4;

/// Gaussian low-pass (sigma = antialias * factor) followed by bicubic
/// decimation to ceil(dim / factor).
inline Image downsample_antialias(const Image& img, int factor,
                                  double antialias = kAntialiasSigmaPerFactor) {
  if (factor < 2) throw InvalidInput("downsample: factor must be >= 2");
  Image filtered = img;
  if (antialias > 0.0) {
    const double sigma = antialias * factor;
    int size = gaussian_support(sigma);
    // Keep the prefilter inside tiny images.
    const int cap = std::min(img.width(), img.height());
    if (size > cap) size = cap % 2 == 1 ? cap : cap - 1;
    filtered = convolve(img, make_kernel(kernels::Gaussian{sigma, size}));
  }
  const int ow = (img.width() + factor - 1) / factor;
  const int oh = (img.height() + factor - 1) / factor;
  return detail::resample_bicubic(filtered, ow, oh, factor, factor);
}

inline Image upsample_bicubic(const Image& img, int factor) {
  if (factor < 2) throw InvalidInput("upsample: factor must be >= 2");
  return detail::resample_bicubic(img, img.width() * factor, img.height() * factor, 1.0 / factor,
                                  1.0 / factor);
}

/// Low-resolution image whose bicubic upsampling matches `img` in size:
/// the training input for digital zoom.
inline Image zoom_degrade(const Image& sharp, int factor, double antialias = kAntialiasSigmaPerFactor) {
  Image up = upsample_bicubic(downsample_antialias(sharp, factor, antialias), factor);
  if (up.same_shape(sharp)) return up;
  Image cropped(sharp.width(), sharp.height());
  for (int y = 0; y < sharp.height(); ++y)
    for (int x = 0; x < sharp.width(); ++x) cropped(x, y) = up(x, y);
  return cropped;
}

// ---------------------------------------------------------------------------
// Denoising front-end

/// Stand-in for an external pre-denoiser: either nothing or a Gaussian
/// low-pass of standard deviation `sigma`.
struct Denoiser {
  enum class Kind { passthrough, gaussian };
  Kind kind = Kind::passthrough;
  double sigma = 0.0;

  static Denoiser passthrough() { return {}; }
  static Denoiser gaussian(double s) { return {Kind::gaussian, s}; }
  friend bool operator==(const Denoiser&, const Denoiser&) = default;
};

inline Denoiser parse_denoiser(const std::string& text) {
  if (text.empty() || text == "none" || text == "passthrough") return Denoiser::passthrough();
  if (text.rfind("gaussian:", 0) == 0) {
    double s = 0.0;
    try {
      s = std::stod(text.substr(9));
    } catch (const std::exception&) {
      throw InvalidInput("denoiser '" + text + "': bad sigma");
    }
    if (!(s > 0.0)) throw InvalidInput("denoiser '" + text + "': sigma must be positive");
    return Denoiser::gaussian(s);
  }
  throw InvalidInput("unknown denoiser '" + text + "' (expected passthrough or gaussian:<sigma>)");
}

inline std::string to_string(const Denoiser& d) {
  if (d.kind == Denoiser::Kind::passthrough) return "passthrough";
  std::ostringstream os;
  os.precision(17);
  os << "gaussian:" << d.sigma;
  return os.str();
}

inline Image denoise(const Image& img, const Denoiser& method) {
  if (method.kind == Denoiser::Kind::passthrough) return img;
  return convolve(img, make_kernel(kernels::Gaussian{method.sigma, 0}));
}

// ---------------------------------------------------------------------------
// Patches

/// Copies the size x size window centered at c, flattened row-major.
template <typename Derived>
void read_patch(const Image& img, PixelCoord c, int size, Eigen::DenseBase<Derived>&& out) {
  const int h = size / 2;
  Index i = 0;
  for (int dy = -h; dy <= h; ++dy)
    for (int dx = -h; dx <= h; ++dx)
      out(i++) = static_cast<typename Derived::Scalar>(img(c.x + dx, c.y + dy));
}

/// Centers whose window of side `window` lies fully inside the image,
/// row-major, on a `stride` grid.
inline std::vector<PixelCoord> patch_centers(int width, int height, int window, int stride = 1) {
  if (window < 1 || window % 2 == 0) throw InvalidInput("patch size must be odd and positive");
  if (stride < 1) throw InvalidInput("stride must be >= 1");
  if (width < window || height < window)
    throw InvalidInput("image " + std::to_string(width) + "x" + std::to_string(height) +
                       " too small for " + std::to_string(window) + "x" + std::to_string(window) +
                       " patches");
  const int h = window / 2;
  std::vector<PixelCoord> centers;
  for (int y = h; y < height - h; y += stride)
    for (int x = h; x < width - h; x += stride) centers.push_back({x, y});
  return centers;
}

/// Co-located (b, b~, s) windows at the given centers, in order.
inline PatchPairSet extract_patch_pairs_at(const Image& sharp, const Image& blurry, const Image& blurry_denoised,
                                           int m_s, int m_b, const std::vector<PixelCoord>& centers) {
  if (!sharp.same_shape(blurry) || !sharp.same_shape(blurry_denoised))
    throw InvalidInput("extract_patch_pairs: images differ in size");
  if (m_s < 1 || m_b < 1 || m_s % 2 == 0 || m_b % 2 == 0 || m_b < m_s)
    throw InvalidInput("extract_patch_pairs: patch sizes must be odd with m_b >= m_s");
  const int h = m_b / 2;
  for (const PixelCoord& c : centers)
    if (c.x < h || c.y < h || c.x + h >= sharp.width() || c.y + h >= sharp.height())
      throw InvalidInput("extract_patch_pairs: window leaves the image");
  const Index n = static_cast<Index>(centers.size());
  PatchPairSet out;
  out.blurry.resize(m_b * m_b, n);
  out.blurry_denoised.resize(m_b * m_b, n);
  out.sharp.resize(m_s * m_s, n);
  for (Index i = 0; i < n; ++i) {
    const PixelCoord c = centers[static_cast<size_t>(i)];
    read_patch(blurry, c, m_b, out.blurry.col(i));
    read_patch(blurry_denoised, c, m_b, out.blurry_denoised.col(i));
    read_patch(sharp, c, m_s, out.sharp.col(i));
  }
  return out;
}

/// Co-located (b, b~, s) windows. If more than `limit` centers are
/// available a uniformly random subset of `limit` is kept (chosen from the
/// seed before any extraction, emitted in raster order).
inline PatchPairSet extract_patch_pairs(const Image& sharp, const Image& blurry,
                                        const Image& blurry_denoised, int m_s, int m_b, int stride,
                                        Index limit, std::uint64_t seed,
                                        std::vector<PixelCoord>* centers_out = nullptr) {
  if (!sharp.same_shape(blurry) || !sharp.same_shape(blurry_denoised))
    throw InvalidInput("extract_patch_pairs: images differ in size");
  if (m_s < 1 || m_b < 1 || m_s % 2 == 0 || m_b % 2 == 0 || m_b < m_s)
    throw InvalidInput("extract_patch_pairs: patch sizes must be odd with m_b >= m_s");
  std::vector<PixelCoord> centers = patch_centers(sharp.width(), sharp.height(), m_b, stride);
  if (limit >= 0 && static_cast<Index>(centers.size()) > limit) {
    std::vector<size_t> order(centers.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < static_cast<size_t>(limit); ++i) {
      std::uniform_int_distribution<size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(static_cast<size_t>(limit));
    std::sort(order.begin(), order.end());
    std::vector<PixelCoord> kept;
    kept.reserve(order.size());
    for (size_t i : order) kept.push_back(centers[i]);
    centers = std::move(kept);
  }
  PatchPairSet out = extract_patch_pairs_at(sharp, blurry, blurry_denoised, m_s, m_b, centers);
  if (centers_out) *centers_out = std::move(centers);
  return out;
}

/// Sum/count accumulation of overlapping square patch predictions
/// (row-major m x m). Predictions are folded in the order they are added.
class PatchAccumulator {
 public:
  PatchAccumulator(int width, int height, int patch_size)
      : size_(patch_size), sum_(width, height, 0.0), count_(width, height, 0.0) {
    if (patch_size < 1 || patch_size % 2 == 0) throw InvalidInput("patch size must be odd and positive");
  }

  template <typename Derived>
  void add(const Eigen::DenseBase<Derived>& patch, PixelCoord c) {
    const int half = size_ / 2;
    if (patch.size() != static_cast<Index>(size_) * size_)
      throw InvalidInput("aggregate: patch length does not match patch size");
    if (c.x - half < 0 || c.y - half < 0 || c.x + half >= sum_.width() || c.y + half >= sum_.height())
      throw InvalidInput("aggregate: patch footprint leaves the image");
    Index j = 0;
    for (int dy = -half; dy <= half; ++dy)
      for (int dx = -half; dx <= half; ++dx) {
        sum_(c.x + dx, c.y + dy) += patch(j++);
        count_(c.x + dx, c.y + dy) += 1.0;
      }
  }

  /// Per-pixel mean; uncovered pixels take the value of `fallback`.
  Image finish(const Image& fallback) const {
    if (!fallback.same_shape(sum_)) throw InvalidInput("aggregate: fallback image has the wrong size");
    Image out = fallback;
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x)
        if (count_(x, y) > 0.0) out(x, y) = sum_(x, y) / count_(x, y);
    return out;
  }

  const Image& coverage() const { return count_; }

 private:
  int size_;
  Image sum_;
  Image count_;
};

/// Averages overlapping patch predictions (columns of `patches`) centered
/// at `centers`. Pixels no patch covers keep the value of `fallback`.
/// `coverage`, if given, receives the number of predictions per pixel.
inline Image aggregate_predictions(const Matrix& patches, const std::vector<PixelCoord>& centers,
                                   const Image& fallback, Image* coverage = nullptr) {
  if (static_cast<size_t>(patches.cols()) != centers.size())
    throw InvalidInput("aggregate_predictions: patch and center counts differ");
  const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(patches.rows()))));
  if (static_cast<Index>(m) * m != patches.rows())
    throw InvalidInput("aggregate_predictions: patches must be squares");
  PatchAccumulator acc(fallback.width(), fallback.height(), m);
  for (size_t i = 0; i < centers.size(); ++i) acc.add(patches.col(static_cast<Index>(i)), centers[i]);
  if (coverage) *coverage = acc.coverage();
  return acc.finish(fallback);
}

}  // namespace supdict
