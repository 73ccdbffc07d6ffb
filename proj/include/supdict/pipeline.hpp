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

// Corpus-level plumbing shared by the command-line tool and the acceptance
// checks: synthetic degradations, training-set generation and the standard
// deblurring settings.

#include <supdict/image_io.hpp>
#include <supdict/imageproc.hpp>
#include <supdict/serialization.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace supdict {

/// How a sharp image is turned into a training/test input.
struct Degradation {
  TaskMode mode = TaskMode::deblur;
  KernelSpec kernel = kernels::Binomial{};
  double noise_var = 0.0;
  int zoom_factor = 2;
  double antialias = kAntialiasSigmaPerFactor;
};

/// splitmix64 finalizer: decorrelated child seeds from (seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Blur + white noise (deblur mode) or downsample-then-upsample (zoom mode).
inline Image degrade(const Image& sharp, const Degradation& d, std::uint64_t seed) {
  if (d.mode == TaskMode::zoom) return zoom_degrade(sharp, d.zoom_factor, d.antialias);
  return add_gaussian_noise(convolve(sharp, make_kernel(d.kernel)), d.noise_var, seed);
}

/// A standard isotropic deblurring setting, numbered 1 to 6.
struct Experiment {
  int id = 0;
  std::string kernel;
  double noise_var = 0.0;
};

inline Experiment standard_experiment(int id) {
  switch (id) {
    case 1: return {1, "uniform:9", 0.308};
    case 2: return {2, "rational:15", 2.0};
    case 3: return {3, "rational:15", 8.0};
    case 4: return {4, "binomial", 49.0};
    case 5: return {5, "gaussian:1", 25.0};
    case 6: return {6, "gaussian:2", 25.0};
    default: throw InvalidInput("unknown experiment " + std::to_string(id) + " (expected 1-6)");
  }
}

struct NamedImage {
  std::string name;
  Image image;
};

/// Every .png / .pgm under `dir` (non-recursive), in file-name order.
/// Unreadable files are reported through `warn` and skipped.
inline std::vector<NamedImage> load_corpus(const std::string& dir,
                                           const std::function<void(const std::string&)>& warn = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string p = entry.path().string();
    if (detail::has_suffix(p, ".png") || detail::has_suffix(p, ".pgm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> out;
  for (const auto& f : files) {
    try {
      out.push_back({f.filename().string(), read_image(f.string())});
    } catch (const DataError& e) {
      if (warn) warn(std::string("skipping ") + e.what());
    }
  }
  return out;
}

struct PairOptions {
  Degradation degradation;
  Denoiser denoiser;
  int patch_size_sharp = 7;
  int patch_size_blurry = 11;
  int stride = 1;
  Index limit = 10'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Degrades every image, extracts co-located patch pairs and keeps a
/// uniformly random subset of at most `limit` pairs over the whole corpus.
/// Patches are scaled by `intensity_scale`. Images are processed in
/// parallel; the result depends only on the inputs and the seed.
inline PatchPairSet make_training_pairs(const std::vector<Image>& images, const PairOptions& opts,
                                        double intensity_scale = 1.0 / 255.0) {
  const int ms = opts.patch_size_sharp, mb = opts.patch_size_blurry;
  std::vector<std::vector<PixelCoord>> centers(images.size());
  Index total = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].width() < mb || images[i].height() < mb) continue;
    centers[i] = patch_centers(images[i].width(), images[i].height(), mb, opts.stride);
    total += static_cast<Index>(centers[i].size());
  }
  if (total == 0) throw DataError("no usable patches in the corpus");

  // Selection sampling over the concatenated center lists keeps raster
  // order within each image and needs no index buffer.
  if (total > opts.limit) {
    std::mt19937_64 rng(derive_seed(opts.seed, 0x5a3b1e));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Index needed = opts.limit, remaining = total;
    for (auto& list : centers) {
      std::vector<PixelCoord> kept;
      for (const PixelCoord& c : list) {
        if (static_cast<double>(remaining) * u(rng) < static_cast<double>(needed)) {
          kept.push_back(c);
          --needed;
        }
        --remaining;
      }
      list = std::move(kept);
    }
    total = opts.limit;
  }

  PatchPairSet out;
  out.blurry.resize(mb * mb, total);
  out.blurry_denoised.resize(mb * mb, total);
  out.sharp.resize(ms * ms, total);
  std::vector<Index> offset(images.size() + 1, 0);
  for (size_t i = 0; i < images.size(); ++i) offset[i + 1] = offset[i] + static_cast<Index>(centers[i].size());

  auto work = [&](size_t i) {
    if (centers[i].empty()) return;
    const Image sharp = scaled(images[i], intensity_scale);
    const Image blurry = scaled(degrade(images[i], opts.degradation, derive_seed(opts.seed, i)), intensity_scale);
    const Image den = denoise(blurry, opts.denoiser);
    const PatchPairSet part = extract_patch_pairs_at(sharp, blurry, den, ms, mb, centers[i]);
    const Index n = part.size();
    out.blurry.middleCols(offset[i], n) = part.blurry;
    out.blurry_denoised.middleCols(offset[i], n) = part.blurry_denoised;
    out.sharp.middleCols(offset[i], n) = part.sharp;
  };
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(images.size()));
  if (threads <= 1) {
    for (size_t i = 0; i < images.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (size_t i = t; i < images.size(); i += threads) work(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace supdict
