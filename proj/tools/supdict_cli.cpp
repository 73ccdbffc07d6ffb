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

// supdict command-line front end.
//
//   supdict make-data     degrade a corpus and write a patch-pair dataset
//   supdict train         learn a model from a dataset or a corpus
//   supdict deblur        restore a blurry image with a model
//   supdict zoom          upscale a low-resolution image with a model
//   supdict bench         synthetic degradation + restoration, CSV report
//   supdict inspect-model print a model's header and metadata
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <supdict/config.hpp>
#include <supdict/csv.hpp>
#include <supdict/image_io.hpp>
#include <supdict/pipeline.hpp>
#include <supdict/restore.hpp>
#include <supdict/serialization.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace supdict;
namespace fs = std::filesystem;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// Flags shared by make-data and train. Unset flags leave the config value.
struct DataFlags {
  std::string config;
  std::optional<std::string> corpus, mode, kernel, denoiser, output, lambda_grid;
  std::optional<double> noise_var, lambda, rho, dict_rate_scale;
  std::optional<int> zoom_factor, stride, passes;
  std::optional<Index> patch_limit, atoms;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app, bool training) {
    app->add_option("--config", config, "INI config file")->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "directory of sharp training images");
    app->add_option("--mode", mode, "deblur or zoom");
    app->add_option("--kernel", kernel, "blur kernel spec, e.g. binomial, gaussian:1, uniform:9");
    app->add_option("--noise-var", noise_var, "noise variance on the 0-255 scale");
    app->add_option("--zoom-factor", zoom_factor, "zoom factor (zoom mode)");
    app->add_option("--denoiser", denoiser, "passthrough or gaussian:<sigma>");
    app->add_option("--patch-limit", patch_limit, "maximum number of patch pairs");
    app->add_option("--stride", stride, "patch center stride");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--output", output, training ? "model file to write" : "dataset file to write");
    if (training) {
      app->add_option("--lambda", lambda, "sparsity weight");
      app->add_option("--lambda-grid", lambda_grid, "comma-separated lambda values to compare");
      app->add_option("--atoms", atoms, "dictionary size");
      app->add_option("--passes", passes, "passes over the training pairs");
      app->add_option("--rho", rho, "learning-rate scale (default: pilot search)");
      app->add_option("--dict-rate-scale", dict_rate_scale, "multiplier on the blurry-dictionary learning rate");
    }
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (corpus) c.corpus = *corpus;
    if (mode) c.mode = parse_mode(*mode);
    if (kernel) c.kernel = *kernel;
    if (noise_var) c.noise_var = *noise_var;
    if (zoom_factor) c.zoom_factor = *zoom_factor;
    if (denoiser) c.denoiser = *denoiser;
    if (patch_limit) c.patch_limit = *patch_limit;
    if (stride) c.stride = *stride;
    if (seed) c.train.seed = *seed;
    if (output) c.output = *output;
    if (lambda) {
      c.train.lambda = *lambda;
      c.lambda_given = true;
    }
    if (lambda_grid) c.lambda_grid = parse_number_list(*lambda_grid);
    if (atoms) c.train.atoms = *atoms;
    if (passes) c.train.passes = *passes;
    if (rho) c.train.rho = *rho;
    if (dict_rate_scale) c.train.dict_blurry_rate_scale = *dict_rate_scale;
    c.validate();
    return c;
  }
};

PairOptions pair_options(const RunConfig& c) {
  PairOptions po;
  po.degradation.mode = c.mode;
  po.degradation.kernel = parse_kernel_spec(c.kernel);
  po.degradation.noise_var = c.noise_var;
  po.degradation.zoom_factor = c.zoom_factor;
  po.degradation.antialias = c.antialias;
  po.denoiser = parse_denoiser(c.denoiser);
  po.patch_size_sharp = c.patch_size_sharp;
  po.patch_size_blurry = c.patch_size_blurry;
  po.stride = c.stride;
  po.limit = c.patch_limit;
  po.seed = c.train.seed;
  return po;
}

PatchPairSet pairs_from_corpus(const RunConfig& c) {
  c.require_corpus();
  std::vector<Image> images;
  for (auto& named : load_corpus(c.corpus, warn)) images.push_back(std::move(named.image));
  if (images.empty()) throw DataError("no readable images in " + c.corpus);
  PatchPairSet pairs = make_training_pairs(images, pair_options(c));
  if (pairs.size() == 0) throw DataError("corpus yields no patch pairs (images smaller than the blurry patch?)");
  return pairs;
}

int cmd_make_data(const DataFlags& flags) {
  const RunConfig c = flags.resolve();
  const std::string out = c.output.empty() ? c.dataset : c.output;
  const PatchPairSet pairs = pairs_from_corpus(c);
  save_dataset(pairs, out);
  std::cout << "pairs: " << pairs.size() << "\nblurry_dim: " << pairs.blurry_dim()
            << "\nsharp_dim: " << pairs.sharp_dim() << "\noutput: " << out << '\n';
  return 0;
}

int cmd_train(const DataFlags& flags, const std::string& data_path) {
  RunConfig c = flags.resolve();
  const std::string out = c.output.empty() ? "model.sdm" : c.output;
  PatchPairSet pairs;
  if (!data_path.empty()) {
    pairs = load_dataset(data_path);
    const Index mb = static_cast<Index>(c.patch_size_blurry) * c.patch_size_blurry;
    const Index ms = static_cast<Index>(c.patch_size_sharp) * c.patch_size_sharp;
    if (pairs.blurry_dim() != mb || pairs.sharp_dim() != ms)
      throw InvalidInput("dataset patch sizes do not match the configured patch sizes");
    if (pairs.size() > c.patch_limit) {
      std::vector<Index> head(static_cast<size_t>(c.patch_limit));
      std::iota(head.begin(), head.end(), Index{0});
      pairs = pairs.select(head);
    }
  } else {
    pairs = pairs_from_corpus(c);
  }

  std::vector<double> grid = c.lambda_grid;
  if (grid.empty()) grid.push_back(c.effective_lambda());

  std::ofstream log(out + ".log");
  if (!log) throw DataError("cannot write training log " + out + ".log");
  auto sink = [&](const TrainLogEntry& e) { log << format_log_line(e) << '\n'; };

  std::optional<TrainResult> best;
  double best_lambda = 0.0;
  for (double lambda : grid) {
    TrainConfig tc = c.train;
    tc.lambda = lambda;
    UnsupervisedReport init_report;
    const Matrix init = init_unsupervised(pairs.blurry, tc.atoms, lambda, tc, &init_report);
    log << "lambda=" << lambda << " init_objective=" << init_report.initial_objective << " -> "
        << init_report.final_objective << '\n';
    TrainResult r = train_supervised(pairs, init, tc, c.patch_size_sharp, c.patch_size_blurry, sink);
    std::cout << "lambda: " << lambda << " initial: " << r.initial_objective << " stage_one: " << r.stage_one_objective
              << " final: " << r.final_objective << " rho: " << r.rho << '\n';
    if (!best || r.final_objective < best->final_objective) {
      best = std::move(r);
      best_lambda = lambda;
    }
  }

  ModelFile f;
  f.model = best->model;
  f.meta.mode = c.mode;
  f.meta.zoom_factor = c.mode == TaskMode::zoom ? c.zoom_factor : 0;
  f.meta.kernel = c.mode == TaskMode::deblur ? c.kernel : "";
  f.meta.noise_variance = c.mode == TaskMode::deblur ? c.noise_var : 0.0;
  f.meta.denoiser = c.denoiser;
  f.meta.seed = c.train.seed;
  f.meta.n = static_cast<std::uint64_t>(pairs.size());
  f.meta.passes = static_cast<std::uint32_t>(c.train.passes);
  save_model(f, out);
  std::cout << "selected_lambda: " << best_lambda << "\nvalidation_objective: " << best->final_objective
            << "\noutput: " << out << '\n';
  return 0;
}

struct RestoreFlags {
  std::string model, input, output, reference, report, denoiser, kernel;
  std::optional<double> noise_var;
  std::optional<int> zoom_factor;
  int stride = 1;
};

void attach_restore(CLI::App* app, RestoreFlags& f, bool zoom) {
  app->add_option("--model", f.model, "model file")->required();
  app->add_option("--input", f.input, zoom ? "low-resolution image" : "blurry image")->required();
  app->add_option("--output", f.output, "restored image (.png or .pgm)")->required();
  app->add_option("--reference", f.reference, "ground truth, enables PSNR/ISNR in the report");
  app->add_option("--report", f.report, "write the report here instead of stdout");
  app->add_option("--denoiser", f.denoiser, "override the model's denoiser");
  app->add_option("--stride", f.stride, "patch center stride")->check(CLI::PositiveNumber);
  if (zoom) {
    app->add_option("--zoom-factor", f.zoom_factor, "zoom factor (default: from the model)");
  } else {
    app->add_option("--kernel", f.kernel, "blur the input was made with (checked against the model)");
    app->add_option("--noise-var", f.noise_var, "noise variance of the input (checked against the model)");
  }
}

int cmd_restore(const RestoreFlags& f, bool zoom_mode) {
  // Everything that can fail on input happens before any output is written.
  const ModelFile mf = load_model(f.model);
  const Image input = read_image(f.input);
  std::optional<Image> reference;
  if (!f.reference.empty()) reference = read_image(f.reference);

  const TaskMode wanted = zoom_mode ? TaskMode::zoom : TaskMode::deblur;
  if (mf.meta.mode != wanted)
    warn("model was trained for " + to_string(mf.meta.mode) + ", running " + to_string(wanted));
  DeblurOptions opts;
  opts.stride = f.stride;
  opts.denoiser = parse_denoiser(f.denoiser.empty() ? mf.meta.denoiser : f.denoiser);

  int factor = 0;
  if (zoom_mode) {
    factor = f.zoom_factor.value_or(mf.meta.zoom_factor >= 2 ? mf.meta.zoom_factor : 2);
    if (factor < 2) throw InvalidInput("--zoom-factor must be >= 2");
    if (mf.meta.mode == TaskMode::zoom && factor != mf.meta.zoom_factor)
      warn("zoom factor " + std::to_string(factor) + " differs from the model's " +
           std::to_string(mf.meta.zoom_factor));
  } else {
    if (!f.kernel.empty() && f.kernel != mf.meta.kernel)
      warn("kernel " + f.kernel + " differs from the model's " + mf.meta.kernel);
    if (f.noise_var && *f.noise_var != mf.meta.noise_variance)
      warn("noise variance differs from the model's " + std::to_string(mf.meta.noise_variance));
  }

  const auto start = std::chrono::steady_clock::now();
  const Image restored = zoom_mode ? zoom(mf.model, input, factor, opts) : deblur(mf.model, input, opts);
  const double runtime = seconds_since(start);

  std::ostringstream report;
  if (reference) {
    const Image degraded = zoom_mode ? upsample_bicubic(input, factor) : input;
    if (!reference->same_shape(restored)) throw InvalidInput("reference size does not match the restored image");
    report << to_text(make_report(*reference, degraded, restored, kDefaultMetricMargin, runtime));
  } else {
    report << "runtime: " << std::fixed << std::setprecision(6) << runtime << '\n';
  }
  write_image(restored, f.output);
  if (f.report.empty()) {
    std::cout << report.str();
  } else {
    std::ofstream out(f.report);
    if (!(out << report.str())) throw DataError("cannot write report " + f.report);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchFlags {
  std::vector<std::string> models, images;
  std::string output;
  std::uint64_t seed = 0;
  int stride = 1;
  unsigned threads = 0;
};

std::string experiment_label(const ModelMetadata& m) {
  if (m.mode == TaskMode::zoom) return "zoom_x" + std::to_string(m.zoom_factor);
  for (int id = 1; id <= 6; ++id) {
    const Experiment e = standard_experiment(id);
    if (e.kernel == m.kernel && e.noise_var == m.noise_variance) return "exp" + std::to_string(id);
  }
  return m.kernel + "/" + csv_number(m.noise_variance);
}

std::vector<NamedImage> bench_images(const std::vector<std::string>& inputs) {
  std::vector<NamedImage> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& img : load_corpus(in, warn)) out.push_back(std::move(img));
    } else {
      out.push_back({fs::path(in).filename().string(), read_image(in)});
    }
  }
  if (out.empty()) throw DataError("no test images");
  return out;
}

struct BenchRow {
  std::string experiment, image, method;
  double lambda = 0, psnr_in = 0, psnr_out = 0, isnr = 0, runtime = 0;
};

// One (model, image) cell: full model and the linear-only ablation.
std::vector<BenchRow> bench_cell(const ModelFile& mf, const NamedImage& img, std::uint64_t seed, int stride) {
  const std::string label = experiment_label(mf.meta);
  const std::uint64_t cell_seed = derive_seed(seed, stable_hash(label + "/" + img.name));
  DeblurOptions opts;
  opts.stride = stride;
  opts.denoiser = parse_denoiser(mf.meta.denoiser);

  Image reference = img.image;
  Image input, degraded;
  const int f = mf.meta.zoom_factor;
  if (mf.meta.mode == TaskMode::zoom) {
    // Crop so that down- and up-sampling return to the reference size.
    const int w = reference.width() / f * f, h = reference.height() / f * f;
    if (w != reference.width() || h != reference.height()) {
      Image c(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) c(x, y) = reference(x, y);
      reference = c;
    }
    input = downsample_antialias(reference, f);
    degraded = upsample_bicubic(input, f);
  } else {
    Degradation d;
    d.kernel = parse_kernel_spec(mf.meta.kernel);
    d.noise_var = mf.meta.noise_variance;
    input = degraded = degrade(reference, d, cell_seed);
  }

  std::vector<BenchRow> rows;
  for (const bool linear : {false, true}) {
    const Model m = linear ? linear_only(mf.model) : mf.model;
    const auto start = std::chrono::steady_clock::now();
    const Image restored = mf.meta.mode == TaskMode::zoom ? zoom(m, input, f, opts) : deblur(m, input, opts);
    const RestorationReport r = make_report(reference, degraded, restored, kDefaultMetricMargin, seconds_since(start));
    rows.push_back({label, img.name, linear ? "linear" : "full", m.lambda, r.psnr_input, r.psnr_output, r.isnr,
                    r.runtime});
  }
  return rows;
}

int cmd_bench(const BenchFlags& flags) {
  std::vector<ModelFile> models;
  for (const auto& p : flags.models) models.push_back(load_model(p));
  const std::vector<NamedImage> images = bench_images(flags.images);

  const size_t cells = models.size() * images.size();
  std::vector<std::vector<BenchRow>> results(cells);
  std::vector<std::exception_ptr> errors(cells);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < cells; i = next++) {
      try {
        results[i] = bench_cell(models[i / images.size()], images[i % images.size()], flags.seed, flags.stride);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned nthreads = static_cast<unsigned>(std::min<size_t>(flags.threads ? flags.threads : hw, cells));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ostringstream csv;
  write_csv_row(csv, {"experiment", "image", "method", "lambda", "psnr_in", "psnr_out", "isnr", "runtime"});
  for (const auto& cell : results)
    for (const auto& r : cell)
      write_csv_row(csv, {r.experiment, r.image, r.method, csv_number(r.lambda, 8), csv_number(r.psnr_in),
                          csv_number(r.psnr_out), csv_number(r.isnr), csv_number(r.runtime, 3)});
  if (flags.output.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(flags.output, std::ios::binary);
    if (!(out << csv.str())) throw DataError("cannot write " + flags.output);
  }
  return 0;
}

int cmd_inspect(const std::string& path) {
  const ModelFile f = load_model(path);
  const Model& m = f.model;
  std::cout << "format_version: " << kFormatVersion << "\nmode: " << to_string(f.meta.mode)
            << "\npatch_size_sharp: " << m.patch_size_sharp << "\npatch_size_blurry: " << m.patch_size_blurry
            << "\natoms: " << m.atoms() << "\nlambda: " << m.lambda << "\nintensity_scale: " << m.intensity_scale
            << "\nkernel: " << f.meta.kernel << "\nnoise_variance: " << f.meta.noise_variance
            << "\nzoom_factor: " << f.meta.zoom_factor << "\ndenoiser: " << f.meta.denoiser
            << "\nseed: " << f.meta.seed << "\ntraining_pairs: " << f.meta.n << "\npasses: " << f.meta.passes
            << "\nlinear_norm: " << m.linear.norm() << "\ndict_sharp_norm: " << m.dict_sharp.norm() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised dictionary learning for deblurring and digital zoom"};
  app.require_subcommand(1);

  DataFlags data_flags, train_flags;
  auto* make_data = app.add_subcommand("make-data", "degrade a corpus and write patch pairs");
  data_flags.attach(make_data, false);

  std::string data_path;
  auto* train = app.add_subcommand("train", "learn a model");
  train_flags.attach(train, true);
  train->add_option("--data", data_path, "patch-pair dataset (default: build from the corpus)")
      ->check(CLI::ExistingFile);

  RestoreFlags deblur_flags, zoom_flags;
  auto* deblur_cmd = app.add_subcommand("deblur", "restore a blurry image");
  attach_restore(deblur_cmd, deblur_flags, false);
  auto* zoom_cmd = app.add_subcommand("zoom", "upscale a low-resolution image");
  attach_restore(zoom_cmd, zoom_flags, true);

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "synthetic degradation and restoration report (CSV)");
  bench->add_option("--model", bench_flags.models, "model file(s); each defines its degradation")->required();
  bench->add_option("--images", bench_flags.images, "test images or directories")->required();
  bench->add_option("--output", bench_flags.output, "CSV file (default: stdout)");
  bench->add_option("--seed", bench_flags.seed, "seed for the synthetic noise");
  bench->add_option("--stride", bench_flags.stride, "patch center stride")->check(CLI::PositiveNumber);
  bench->add_option("--threads", bench_flags.threads, "worker threads (default: all cores)");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-model", "print model metadata");
  inspect->add_option("--model,model", inspect_path, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*make_data) return cmd_make_data(data_flags);
    if (*train) return cmd_train(train_flags, data_path);
    if (*deblur_cmd) return cmd_restore(deblur_flags, false);
    if (*zoom_cmd) return cmd_restore(zoom_flags, true);
    if (*bench) return cmd_bench(bench_flags);
    if (*inspect) return cmd_inspect(inspect_path);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
