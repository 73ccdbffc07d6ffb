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

#include <supdict/common.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace supdict {

/// Single-channel intensity image, row-major, nominal range [0, 255].
/// Values are kept unclipped; clipping happens only on export.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw InvalidInput("image dimensions must be positive, got " + std::to_string(width) + "x" +
                         std::to_string(height));
    pixels_.assign(static_cast<size_t>(width) * static_cast<size_t>(height), fill);
  }
  Image(int width, int height, std::vector<double> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1)
      throw InvalidInput("image dimensions must be positive");
    if (pixels_.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
      throw InvalidInput("pixel buffer size does not match image dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& operator()(int x, int y) { return pixels_[index(x, y)]; }
  double operator()(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool is_finite() const {
    for (double v : pixels_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  size_t index(int x, int y) const {
    return static_cast<size_t>(y) * static_cast<size_t>(width_) + static_cast<size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Half-sample symmetric extension: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

inline Image scaled(const Image& img, double factor) {
  Image out = img;
  for (double& v : out.pixels()) v *= factor;
  return out;
}

}  // namespace supdict
