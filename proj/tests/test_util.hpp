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
#include <supdict/image.hpp>

#include <random>
#include <string>

#ifndef SUPDICT_SOURCE_DIR
#define SUPDICT_SOURCE_DIR "."
#endif

namespace supdict_test {

inline supdict::Vector gaussian_vector(supdict::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  supdict::Vector v(n);
  for (supdict::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline supdict::Matrix gaussian_matrix(supdict::Index r, supdict::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  supdict::Matrix m(r, c);
  for (supdict::Index j = 0; j < c; ++j)
    for (supdict::Index i = 0; i < r; ++i) m(i, j) = g(rng);
  return m;
}

inline supdict::Matrix random_unit_dictionary(supdict::Index m, supdict::Index k, std::mt19937_64& rng) {
  supdict::Matrix d = gaussian_matrix(m, k, rng);
  for (supdict::Index j = 0; j < k; ++j) d.col(j).normalize();
  return d;
}

inline supdict::Image random_image(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 255.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  supdict::Image img(w, h);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

/// Integer-valued image: survives the single-precision patch store exactly.
inline supdict::Image random_integer_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, 255);
  supdict::Image img(w, h);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

inline std::string source_path(const std::string& rel) { return std::string(SUPDICT_SOURCE_DIR) + "/" + rel; }

}  // namespace supdict_test
