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

// Run configuration: an INI file (key = value under [data], [train] and
// [run] sections) with command-line overrides applied on top.
//
//   [data]
//   corpus = data/corpus
//   mode = deblur            ; or zoom
//   kernel = binomial
//   noise_var = 49
//   zoom_factor = 2
//   denoiser = passthrough
//   patch_limit = 10000000
//   patch_size_sharp = 7
//   patch_size_blurry = 11
//   stride = 1
//
//   [train]
//   atoms = 512
//   lambda = 0.1
//   lambda_grid = 0.05, 0.1, 0.2
//   mu = 1e-8
//   rho = 1                  ; omitted: pilot search over rho_grid
//   batch_size = 500
//   passes = 1
//
//   [run]
//   seed = 0
//   dataset = patches.bin
//   output = model.sdm

#include <supdict/dict_learn.hpp>
#include <supdict/imageproc.hpp>
#include <supdict/kernel.hpp>
#include <supdict/serialization.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace supdict {

inline constexpr double kZoomLambda = 0.005;

struct RunConfig {
  TrainConfig train;
  std::string corpus = "data/corpus";
  TaskMode mode = TaskMode::deblur;
  std::string kernel = "binomial";
  double noise_var = 49.0;
  int zoom_factor = 2;
  std::string denoiser = "passthrough";
  Index patch_limit = 10'000'000;
  int patch_size_sharp = 7;
  int patch_size_blurry = 11;
  int stride = 1;
  double antialias = kAntialiasSigmaPerFactor;
  // Extra lambda values to compare by validation objective; empty means
  // train at train.lambda only.
  std::vector<double> lambda_grid;
  // Whether train.lambda was given; zoom mode otherwise uses kZoomLambda.
  bool lambda_given = false;
  std::string dataset = "patches.bin";
  std::string output;

  /// Checks value ranges. Paths are checked by the commands that use them.
  void validate() const {
    train.validate();
    if (mode == TaskMode::deblur) {
      make_kernel(parse_kernel_spec(kernel));
      if (!(noise_var >= 0.0)) throw InvalidInput("config: noise_var must be non-negative");
    } else if (zoom_factor < 2) {
      throw InvalidInput("config: zoom_factor must be >= 2");
    }
    parse_denoiser(denoiser);
    if (patch_limit < 1) throw InvalidInput("config: patch_limit must be >= 1");
    if (patch_size_sharp < 1 || patch_size_blurry < 1 || patch_size_sharp % 2 == 0 || patch_size_blurry % 2 == 0 ||
        patch_size_blurry < patch_size_sharp)
      throw InvalidInput("config: patch sizes must be odd with patch_size_blurry >= patch_size_sharp");
    if (stride < 1) throw InvalidInput("config: stride must be >= 1");
    for (double l : lambda_grid)
      if (!(l > 0.0)) throw InvalidInput("config: lambda_grid values must be positive");
  }

  double effective_lambda() const {
    return mode == TaskMode::zoom && !lambda_given ? kZoomLambda : train.lambda;
  }

  void require_corpus() const {
    if (!std::filesystem::is_directory(corpus)) throw DataError("config: corpus directory not found: " + corpus);
  }
};

inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    try {
      size_t used = 0;
      const std::string tok = item.substr(a, b - a + 1);
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw InvalidInput("");
    } catch (const std::exception&) {
      throw InvalidInput("cannot parse number list '" + text + "'");
    }
  }
  return out;
}

inline TaskMode parse_mode(const std::string& s) {
  if (s == "deblur") return TaskMode::deblur;
  if (s == "zoom") return TaskMode::zoom;
  throw InvalidInput("unknown mode '" + s + "' (expected deblur or zoom)");
}

inline std::string to_string(TaskMode m) { return m == TaskMode::deblur ? "deblur" : "zoom"; }

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "data.corpus", "data.mode", "data.kernel", "data.noise_var", "data.zoom_factor", "data.denoiser",
      "data.patch_limit", "data.patch_size_sharp", "data.patch_size_blurry", "data.stride", "data.antialias",
      "train.atoms", "train.lambda", "train.lambda_grid", "train.mu", "train.rho", "train.rho_grid", "train.t0",
      "train.dict_blurry_rate_scale", "train.batch_size", "train.passes", "train.init_epochs",
      "train.pilot_samples", "train.validation_fraction", "train.validation_max", "train.log_every",
      "train.stage_one", "run.seed", "run.dataset", "run.output"};
  return keys;
}

template <typename T>
T get_value(const boost::property_tree::ptree& tree, const std::string& key, T fallback) {
  const auto node = tree.get_optional<std::string>(key);
  if (!node) return fallback;
  std::istringstream in(*node);
  T v;
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw InvalidInput("config: bad value for " + key + ": '" + *node + "'");
  return v;
}

}  // namespace detail

/// Reads an INI config. Unknown keys are rejected so typos do not pass
/// silently.
inline RunConfig parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw InvalidInput("config: key '" + section + "' outside a section");
    for (const auto& kv : body) {
      const std::string key = section + "." + kv.first;
      if (!detail::known_config_keys().count(key)) throw InvalidInput("config: unknown key " + key);
    }
  }
  using detail::get_value;
  RunConfig c;
  c.corpus = tree.get<std::string>("data.corpus", c.corpus);
  c.mode = parse_mode(tree.get<std::string>("data.mode", to_string(c.mode)));
  c.kernel = tree.get<std::string>("data.kernel", c.kernel);
  c.noise_var = get_value(tree, "data.noise_var", c.noise_var);
  c.zoom_factor = get_value(tree, "data.zoom_factor", c.zoom_factor);
  c.denoiser = tree.get<std::string>("data.denoiser", c.denoiser);
  c.patch_limit = get_value(tree, "data.patch_limit", c.patch_limit);
  c.patch_size_sharp = get_value(tree, "data.patch_size_sharp", c.patch_size_sharp);
  c.patch_size_blurry = get_value(tree, "data.patch_size_blurry", c.patch_size_blurry);
  c.stride = get_value(tree, "data.stride", c.stride);
  c.antialias = get_value(tree, "data.antialias", c.antialias);

  TrainConfig& t = c.train;
  t.atoms = get_value(tree, "train.atoms", t.atoms);
  t.lambda = get_value(tree, "train.lambda", t.lambda);
  c.lambda_given = tree.get_optional<std::string>("train.lambda").has_value();
  if (auto g = tree.get_optional<std::string>("train.lambda_grid")) c.lambda_grid = parse_number_list(*g);
  t.mu = get_value(tree, "train.mu", t.mu);
  if (tree.get_optional<std::string>("train.rho")) t.rho = get_value(tree, "train.rho", 0.0);
  if (auto g = tree.get_optional<std::string>("train.rho_grid")) t.rho_grid = parse_number_list(*g);
  if (tree.get_optional<std::string>("train.t0")) t.t0 = get_value(tree, "train.t0", 0.0);
  t.dict_blurry_rate_scale = get_value(tree, "train.dict_blurry_rate_scale", t.dict_blurry_rate_scale);
  t.batch_size = get_value(tree, "train.batch_size", t.batch_size);
  t.passes = get_value(tree, "train.passes", t.passes);
  t.init_epochs = get_value(tree, "train.init_epochs", t.init_epochs);
  t.pilot_samples = get_value(tree, "train.pilot_samples", t.pilot_samples);
  t.validation_fraction = get_value(tree, "train.validation_fraction", t.validation_fraction);
  t.validation_max = get_value(tree, "train.validation_max", t.validation_max);
  t.log_every = get_value(tree, "train.log_every", t.log_every);
  if (auto s = tree.get_optional<std::string>("train.stage_one")) {
    if (*s == "closed_form")
      t.stage_one = StageOneSolver::closed_form;
    else if (*s == "sgd")
      t.stage_one = StageOneSolver::sgd;
    else
      throw InvalidInput("config: train.stage_one must be closed_form or sgd");
  }
  t.seed = get_value(tree, "run.seed", t.seed);
  c.dataset = tree.get<std::string>("run.dataset", c.dataset);
  c.output = tree.get<std::string>("run.output", c.output);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  return parse_config(in);
}

/// The effective configuration as INI text, recorded next to artifacts.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto list = [&](const std::vector<double>& v) {
    std::ostringstream s;
    s << std::setprecision(17);
    for (size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
    return s.str();
  };
  os << "[data]\n"
     << "corpus = " << c.corpus << '\n'
     << "mode = " << to_string(c.mode) << '\n'
     << "kernel = " << c.kernel << '\n'
     << "noise_var = " << c.noise_var << '\n'
     << "zoom_factor = " << c.zoom_factor << '\n'
     << "denoiser = " << c.denoiser << '\n'
     << "patch_limit = " << c.patch_limit << '\n'
     << "patch_size_sharp = " << c.patch_size_sharp << '\n'
     << "patch_size_blurry = " << c.patch_size_blurry << '\n'
     << "stride = " << c.stride << '\n'
     << "antialias = " << c.antialias << "\n\n";
  const TrainConfig& t = c.train;
  os << "[train]\n"
     << "atoms = " << t.atoms << '\n'
     << "lambda = " << t.lambda << '\n';
  if (!c.lambda_grid.empty()) os << "lambda_grid = " << list(c.lambda_grid) << '\n';
  os << "mu = " << t.mu << '\n';
  if (t.rho) os << "rho = " << *t.rho << '\n';
  os << "rho_grid = " << list(t.rho_grid) << '\n';
  if (t.t0) os << "t0 = " << *t.t0 << '\n';
  os << "dict_blurry_rate_scale = " << t.dict_blurry_rate_scale << '\n';
  os << "batch_size = " << t.batch_size << '\n'
     << "passes = " << t.passes << '\n'
     << "init_epochs = " << t.init_epochs << '\n'
     << "pilot_samples = " << t.pilot_samples << '\n'
     << "validation_fraction = " << t.validation_fraction << '\n'
     << "validation_max = " << t.validation_max << '\n'
     << "log_every = " << t.log_every << '\n'
     << "stage_one = " << (t.stage_one == StageOneSolver::closed_form ? "closed_form" : "sgd") << "\n\n";
  os << "[run]\n"
     << "seed = " << t.seed << '\n'
     << "dataset = " << c.dataset << '\n'
     << "output = " << c.output << '\n';
  return os.str();
}

}  // namespace supdict
