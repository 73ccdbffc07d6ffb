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

// Binary model and patch-dataset files. Everything is little-endian.
//
// Model file:
//   "SUPDICTM" u32 version
//   u32 m_s  u32 m_b  u32 k  f64 lambda  f64 intensity_scale
//   u32 mode (0 deblur, 1 zoom)  i32 zoom_factor  str kernel  f64 noise_variance  str denoiser
//   u64 seed  u64 n  u32 passes
//   f64[] W (m_s^2 x m_b^2), D_b (m_b^2 x k), D_s (m_s^2 x k), each row-major
//   u32 crc32 of every preceding byte
// (str = u32 length + bytes)
//
// Patch dataset file:
//   "SUPDICTP" u32 version  u64 n  u32 blurry_dim  u32 sharp_dim
//   n records of f32[blurry_dim] b, f32[blurry_dim] b~, f32[sharp_dim] s

#include <supdict/dict_learn.hpp>

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace supdict {

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_raw(const char* s, size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  // Row-major payload.
  void put_matrix(const Matrix& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) put<double>(m(r, c));
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, size_t size, std::string what) : data_(data), size_(size), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, data_ + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix get_matrix(Index rows, Index cols) {
    need(static_cast<size_t>(rows * cols) * sizeof(double));
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = get<double>();
    return m;
  }
  size_t position() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }

 private:
  void need(size_t n) const {
    if (size_ - pos_ < n) throw CorruptModel(what_ + ": truncated file");
  }
  const std::uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::string what_;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace detail

enum class TaskMode : std::uint32_t { deblur = 0, zoom = 1 };

/// What a model was trained for and where it came from.
struct ModelMetadata {
  TaskMode mode = TaskMode::deblur;
  int zoom_factor = 0;
  std::string kernel;  // kernel spec text; empty in zoom mode
  double noise_variance = 0.0;
  std::string denoiser = "passthrough";
  std::uint64_t seed = 0;
  std::uint64_t n = 0;
  std::uint32_t passes = 0;
  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

struct ModelFile {
  Model model;
  ModelMetadata meta;
  friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

inline constexpr char kModelMagic[8] = {'S', 'U', 'P', 'D', 'I', 'C', 'T', 'M'};
inline constexpr char kDatasetMagic[8] = {'S', 'U', 'P', 'D', 'I', 'C', 'T', 'P'};
inline constexpr std::uint32_t kFormatVersion = 1;

inline std::vector<std::uint8_t> encode_model(const ModelFile& f) {
  f.model.validate();
  detail::ByteWriter w;
  w.put_raw(kModelMagic, 8);
  w.put(kFormatVersion);
  w.put(static_cast<std::uint32_t>(f.model.patch_size_sharp));
  w.put(static_cast<std::uint32_t>(f.model.patch_size_blurry));
  w.put(static_cast<std::uint32_t>(f.model.atoms()));
  w.put(f.model.lambda);
  w.put(f.model.intensity_scale);
  w.put(static_cast<std::uint32_t>(f.meta.mode));
  w.put(static_cast<std::int32_t>(f.meta.zoom_factor));
  w.put_string(f.meta.kernel);
  w.put(f.meta.noise_variance);
  w.put_string(f.meta.denoiser);
  w.put(f.meta.seed);
  w.put(f.meta.n);
  w.put(f.meta.passes);
  w.put_matrix(f.model.linear);
  w.put_matrix(f.model.dict_blurry);
  w.put_matrix(f.model.dict_sharp);
  const std::uint32_t crc = detail::crc32_of(w.bytes().data(), w.bytes().size());
  w.put(crc);
  return std::move(w.bytes());
}

inline ModelFile decode_model(const std::vector<std::uint8_t>& bytes, const std::string& what = "model") {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kModelMagic, 8) != 0)
    throw CorruptModel(what + ": not a model file");
  const size_t body = bytes.size() - 4;
  detail::ByteReader tail(bytes.data() + body, 4, what);
  if (tail.get<std::uint32_t>() != detail::crc32_of(bytes.data(), body))
    throw CorruptModel(what + ": checksum mismatch");
  detail::ByteReader r(bytes.data() + 8, body - 8, what);
  if (r.get<std::uint32_t>() != kFormatVersion) throw CorruptModel(what + ": unsupported format version");
  ModelFile f;
  const auto ms = r.get<std::uint32_t>(), mb = r.get<std::uint32_t>(), k = r.get<std::uint32_t>();
  if (ms == 0 || mb == 0 || k == 0 || ms > 255 || mb > 255) throw CorruptModel(what + ": implausible geometry");
  f.model.patch_size_sharp = static_cast<int>(ms);
  f.model.patch_size_blurry = static_cast<int>(mb);
  f.model.lambda = r.get<double>();
  f.model.intensity_scale = r.get<double>();
  const auto mode = r.get<std::uint32_t>();
  if (mode > 1) throw CorruptModel(what + ": unknown task mode");
  f.meta.mode = static_cast<TaskMode>(mode);
  f.meta.zoom_factor = r.get<std::int32_t>();
  f.meta.kernel = r.get_string();
  f.meta.noise_variance = r.get<double>();
  f.meta.denoiser = r.get_string();
  f.meta.seed = r.get<std::uint64_t>();
  f.meta.n = r.get<std::uint64_t>();
  f.meta.passes = r.get<std::uint32_t>();
  const Index sd = f.model.sharp_dim(), bd = f.model.blurry_dim();
  const size_t payload = static_cast<size_t>(sd * bd + bd * k + sd * k) * sizeof(double);
  if (r.remaining() != payload) throw CorruptModel(what + ": payload size does not match header dimensions");
  f.model.linear = r.get_matrix(sd, bd);
  f.model.dict_blurry = r.get_matrix(bd, k);
  f.model.dict_sharp = r.get_matrix(sd, k);
  try {
    f.model.validate();
  } catch (const Error& e) {
    throw CorruptModel(what + ": " + e.what());
  }
  return f;
}

inline void save_model(const ModelFile& f, const std::string& path) { detail::spit(path, encode_model(f)); }

inline ModelFile load_model(const std::string& path) { return decode_model(detail::slurp(path), path); }

// ---------------------------------------------------------------------------
// Patch datasets

inline void save_dataset(const PatchPairSet& data, const std::string& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + path);
  detail::ByteWriter head;
  head.put_raw(kDatasetMagic, 8);
  head.put(kFormatVersion);
  head.put(static_cast<std::uint64_t>(data.size()));
  head.put(static_cast<std::uint32_t>(data.blurry_dim()));
  head.put(static_cast<std::uint32_t>(data.sharp_dim()));
  out.write(reinterpret_cast<const char*>(head.bytes().data()), static_cast<std::streamsize>(head.bytes().size()));
  detail::ByteWriter rec;
  for (Index i = 0; i < data.size(); ++i) {
    rec.bytes().clear();
    for (Index j = 0; j < data.blurry_dim(); ++j) rec.put<float>(data.blurry(j, i));
    for (Index j = 0; j < data.blurry_dim(); ++j) rec.put<float>(data.blurry_denoised(j, i));
    for (Index j = 0; j < data.sharp_dim(); ++j) rec.put<float>(data.sharp(j, i));
    out.write(reinterpret_cast<const char*>(rec.bytes().data()), static_cast<std::streamsize>(rec.bytes().size()));
  }
  if (!out) throw DataError("write failed: " + path);
}

inline PatchPairSet load_dataset(const std::string& path) {
  const std::vector<std::uint8_t> bytes = detail::slurp(path);
  if (bytes.size() < 28 || std::memcmp(bytes.data(), kDatasetMagic, 8) != 0)
    throw DataError(path + ": not a patch dataset");
  detail::ByteReader r(bytes.data() + 8, bytes.size() - 8, path);
  if (r.get<std::uint32_t>() != kFormatVersion) throw DataError(path + ": unsupported dataset version");
  const auto n = static_cast<Index>(r.get<std::uint64_t>());
  const auto bd = static_cast<Index>(r.get<std::uint32_t>());
  const auto sd = static_cast<Index>(r.get<std::uint32_t>());
  if (r.remaining() != static_cast<size_t>(n * (2 * bd + sd)) * sizeof(float))
    throw DataError(path + ": body size does not match header");
  PatchPairSet data;
  data.blurry.resize(bd, n);
  data.blurry_denoised.resize(bd, n);
  data.sharp.resize(sd, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < bd; ++j) data.blurry(j, i) = r.get<float>();
    for (Index j = 0; j < bd; ++j) data.blurry_denoised(j, i) = r.get<float>();
    for (Index j = 0; j < sd; ++j) data.sharp(j, i) = r.get<float>();
  }
  return data;
}

}  // namespace supdict
