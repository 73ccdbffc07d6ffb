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

#include <string>
#include <vector>

namespace supdict {

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Training pairs stored column-wise: column i of `blurry`, `blurry_denoised`
/// and `sharp` all belong to the same pixel location of the same image pair.
/// Single precision matches the on-disk dataset format.
struct PatchPairSet {
  Eigen::MatrixXf blurry;           // m_b^2 x n
  Eigen::MatrixXf blurry_denoised;  // m_b^2 x n
  Eigen::MatrixXf sharp;            // m_s^2 x n

  Index size() const { return sharp.cols(); }
  Index blurry_dim() const { return blurry.rows(); }
  Index sharp_dim() const { return sharp.rows(); }

  void validate() const {
    if (blurry.cols() != sharp.cols() || blurry_denoised.cols() != sharp.cols())
      throw InvalidInput("patch pair set: lists of unequal length");
    if (blurry.rows() != blurry_denoised.rows())
      throw InvalidInput("patch pair set: blurry and denoised patches differ in size");
  }

  /// Column subset in the given order.
  PatchPairSet select(const std::vector<Index>& columns) const {
    PatchPairSet out;
    out.blurry.resize(blurry.rows(), static_cast<Index>(columns.size()));
    out.blurry_denoised.resize(blurry_denoised.rows(), static_cast<Index>(columns.size()));
    out.sharp.resize(sharp.rows(), static_cast<Index>(columns.size()));
    for (size_t i = 0; i < columns.size(); ++i) {
      const auto c = columns[i];
      const auto o = static_cast<Index>(i);
      out.blurry.col(o) = blurry.col(c);
      out.blurry_denoised.col(o) = blurry_denoised.col(c);
      out.sharp.col(o) = sharp.col(c);
    }
    return out;
  }

  void append(const PatchPairSet& other) {
    if (size() == 0) {
      *this = other;
      return;
    }
    if (other.size() == 0) return;
    if (other.blurry_dim() != blurry_dim() || other.sharp_dim() != sharp_dim())
      throw InvalidInput("patch pair set: cannot append patches of a different geometry");
    auto grow = [](Eigen::MatrixXf& dst, const Eigen::MatrixXf& src) {
      Eigen::MatrixXf merged(dst.rows(), dst.cols() + src.cols());
      merged << dst, src;
      dst = std::move(merged);
    };
    grow(blurry, other.blurry);
    grow(blurry_denoised, other.blurry_denoised);
    grow(sharp, other.sharp);
  }
};

}  // namespace supdict
