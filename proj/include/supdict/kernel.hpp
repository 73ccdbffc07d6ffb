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
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace supdict {

/// Normalized 2-D convolution kernel with odd side lengths. weights(r, c)
/// sits at offset (r - rows/2, c - cols/2) from the center.
struct BlurKernel {
  Matrix weights;

  int rows() const { return static_cast<int>(weights.rows()); }
  int cols() const { return static_cast<int>(weights.cols()); }
  int half_rows() const { return rows() / 2; }
  int half_cols() const { return cols() / 2; }
};

namespace kernels {
struct Uniform {
  int size = 9;
};
/// k(x1, x2) = 1 / (1 + x1^2 + x2^2) on a size x size grid.
struct Rational {
  int size = 15;
};
/// [1 4 6 4 1]^T [1 4 6 4 1] / 256.
struct Binomial {};
/// Isotropic Gaussian with standard deviation sigma. size == 0 picks
/// 2 * ceil(4 sigma) + 1.
struct Gaussian {
  double sigma = 1.0;
  int size = 0;
};
struct FromFile {
  std::string path;
};
}  // namespace kernels

using KernelSpec = std::variant<kernels::Uniform, kernels::Rational, kernels::Binomial,
                                kernels::Gaussian, kernels::FromFile>;

inline int gaussian_support(double sigma) {
  return 2 * static_cast<int>(std::ceil(4.0 * sigma)) + 1;
}

namespace detail {

inline void require_odd(int size, const char* what) {
  if (size < 1 || size % 2 == 0)
    throw InvalidInput(std::string(what) + ": kernel support must be odd and positive, got " +
                       std::to_string(size));
}

inline BlurKernel normalized(Matrix w, const char* what) {
  if (!all_finite(w)) throw InvalidInput(std::string(what) + ": non-finite kernel weights");
  const double total = w.sum();
  if (!(total > 0.0)) throw InvalidInput(std::string(what) + ": kernel weights must have a positive sum");
  w /= total;
  return BlurKernel{std::move(w)};
}

}  // namespace detail

/// Parses a plain-text kernel: one row per line, whitespace-separated
/// weights. Blank lines and lines starting with '#' are skipped.
inline Matrix parse_kernel_text(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw InvalidInput("bad number");
      } catch (const std::exception&) {
        throw InvalidInput("kernel file: cannot parse '" + tok + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidInput("kernel file: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput("kernel file: no weights");
  Matrix w(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < w.rows(); ++r)
    for (Index c = 0; c < w.cols(); ++c) w(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
  return w;
}

inline BlurKernel make_kernel(const KernelSpec& spec) {
  struct Builder {
    BlurKernel operator()(const kernels::Uniform& u) const {
      detail::require_odd(u.size, "uniform");
      return detail::normalized(Matrix::Ones(u.size, u.size), "uniform");
    }
    BlurKernel operator()(const kernels::Rational& r) const {
      detail::require_odd(r.size, "rational");
      const int h = r.size / 2;
      Matrix w(r.size, r.size);
      for (int y = -h; y <= h; ++y)
        for (int x = -h; x <= h; ++x) w(y + h, x + h) = 1.0 / (1.0 + x * x + y * y);
      return detail::normalized(std::move(w), "rational");
    }
    BlurKernel operator()(const kernels::Binomial&) const {
      Vector taps(5);
      taps << 1, 4, 6, 4, 1;
      return detail::normalized(taps * taps.transpose(), "binomial");
    }
    BlurKernel operator()(const kernels::Gaussian& g) const {
      if (!(g.sigma > 0.0) || !std::isfinite(g.sigma))
        throw InvalidInput("gaussian: sigma must be positive");
      const int size = g.size == 0 ? gaussian_support(g.sigma) : g.size;
      detail::require_odd(size, "gaussian");
      const int h = size / 2;
      Matrix w(size, size);
      for (int y = -h; y <= h; ++y)
        for (int x = -h; x <= h; ++x)
          w(y + h, x + h) = std::exp(-(x * x + y * y) / (2.0 * g.sigma * g.sigma));
      return detail::normalized(std::move(w), "gaussian");
    }
    BlurKernel operator()(const kernels::FromFile& f) const {
      std::ifstream in(f.path);
      if (!in) throw InvalidInput("kernel file: cannot open " + f.path);
      Matrix w = parse_kernel_text(in);
      detail::require_odd(static_cast<int>(w.rows()), "kernel file");
      detail::require_odd(static_cast<int>(w.cols()), "kernel file");
      return detail::normalized(std::move(w), "kernel file");
    }
  };
  return std::visit(Builder{}, spec);
}

/// Textual form used on the command line and in model metadata:
/// "uniform:9", "rational:15", "binomial", "gaussian:1.5[:size]", "file:path".
inline KernelSpec parse_kernel_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto to_int = [&](const std::string& s) {
    try {
      size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size()) throw InvalidInput("");
      return v;
    } catch (const std::exception&) {
      throw InvalidInput("kernel spec '" + text + "': expected an integer, got '" + s + "'");
    }
  };
  if (name == "uniform") return kernels::Uniform{rest.empty() ? 9 : to_int(rest)};
  if (name == "rational") return kernels::Rational{rest.empty() ? 15 : to_int(rest)};
  if (name == "binomial") return kernels::Binomial{};
  if (name == "gaussian") {
    if (rest.empty()) throw InvalidInput("kernel spec '" + text + "': gaussian needs a sigma");
    const auto c2 = rest.find(':');
    double sigma;
    try {
      sigma = std::stod(rest.substr(0, c2));
    } catch (const std::exception&) {
      throw InvalidInput("kernel spec '" + text + "': bad sigma");
    }
    return kernels::Gaussian{sigma, c2 == std::string::npos ? 0 : to_int(rest.substr(c2 + 1))};
  }
  if (name == "file") {
    if (rest.empty()) throw InvalidInput("kernel spec '" + text + "': missing path");
    return kernels::FromFile{rest};
  }
  throw InvalidInput("unknown kernel spec '" + text + "'");
}

inline std::string to_string(const KernelSpec& spec) {
  struct Printer {
    std::string operator()(const kernels::Uniform& u) const { return "uniform:" + std::to_string(u.size); }
    std::string operator()(const kernels::Rational& r) const { return "rational:" + std::to_string(r.size); }
    std::string operator()(const kernels::Binomial&) const { return "binomial"; }
    std::string operator()(const kernels::Gaussian& g) const {
      std::ostringstream os;
      os.precision(17);
      os << "gaussian:" << g.sigma;
      if (g.size != 0) os << ':' << g.size;
      return os.str();
    }
    std::string operator()(const kernels::FromFile& f) const { return "file:" + f.path; }
  };
  return std::visit(Printer{}, spec);
}

}  // namespace supdict
