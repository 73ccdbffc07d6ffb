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

// Runs the supdict binary end to end on tiny inputs.

#include <supdict/image_io.hpp>
#include <supdict/pipeline.hpp>
#include <supdict/restore.hpp>
#include <supdict/serialization.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace supdict;
namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int code = -1;
  std::string out, err;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::path(testing::TempDir()) / "supdict_cli";
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "corpus");
    // Two small crops of the sample corpus keep every command fast.
    const Image a = read_image(supdict_test::source_path("data/corpus/brick.png"));
    const Image b = read_image(supdict_test::source_path("data/corpus/coins.png"));
    write_image(crop(a, 64, 64), (dir_ / "corpus" / "a.png").string());
    write_image(crop(b, 80, 60), (dir_ / "corpus" / "b.png").string());
    write_image(crop(read_image(supdict_test::source_path("data/test/camera.png")), 48, 48),
                (dir_ / "ref.png").string());
    const CommandResult r = run("train --corpus " + path("corpus") + " --patch-limit 3000 --atoms 16 --lambda 0.1 --rho 0.1"
                      " --seed 5 --output " + path("model.sdm"));
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static Image crop(const Image& img, int w, int h) {
    Image out(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(x, y) = img(x + 100, y + 100);
    return out;
  }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static CommandResult run(const std::string& args) {
    const std::string out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd = std::string(SUPDICT_CLI) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    CommandResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text(out);
    r.err = read_text(err);
    return r;
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, MakeDataSingleImageCountAndDeterminism) {
  fs::create_directories(path("one"));
  fs::copy_file(path("corpus/a.png"), path("one/a.png"), fs::copy_options::overwrite_existing);
  ASSERT_EQ(run("make-data --corpus " + path("one") + " --seed 2 --output " + path("d1.bin")).code, 0);
  ASSERT_EQ(run("make-data --corpus " + path("one") + " --seed 2 --output " + path("d2.bin")).code, 0);
  EXPECT_EQ(load_dataset(path("d1.bin")).size(), 2916);
  EXPECT_EQ(read_text(path("d1.bin")), read_text(path("d2.bin")));
}

TEST_F(Cli, TrainIsReproducibleAndReloads) {
  const CommandResult r = run("train --corpus " + path("corpus") + " --patch-limit 3000 --atoms 16 --lambda 0.1 --rho 0.1"
                    " --seed 5 --output " + path("again.sdm"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text(path("again.sdm")), read_text(path("model.sdm")));
  const ModelFile f = load_model(path("model.sdm"));
  EXPECT_EQ(f.model.atoms(), 16);
  EXPECT_EQ(f.meta.kernel, "binomial");
  EXPECT_EQ(f.meta.seed, 5u);
  EXPECT_EQ(f.meta.n, 3000u);
  EXPECT_TRUE(fs::exists(path("model.sdm.log")));
}

TEST_F(Cli, LambdaGridSelectsLowestValidationObjective) {
  const CommandResult r = run("train --corpus " + path("corpus") + " --patch-limit 2000 --atoms 8 --rho 0.1"
                    " --lambda-grid 0.05,0.2 --output " + path("grid.sdm"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  double best = 1e300, best_lambda = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    double lambda, init, s1, fin, rho;
    if (std::sscanf(line.c_str(), "lambda: %lf initial: %lf stage_one: %lf final: %lf rho: %lf", &lambda, &init, &s1,
                    &fin, &rho) == 5) {
      ++rows;
      if (fin < best) best = fin, best_lambda = lambda;
    }
  }
  EXPECT_EQ(rows, 2);
  EXPECT_DOUBLE_EQ(load_model(path("grid.sdm")).model.lambda, best_lambda);
}

TEST_F(Cli, MissingModelFailsWithoutOutput) {
  const CommandResult r = run("deblur --model " + path("absent.sdm") + " --input " + path("ref.png") + " --output " +
                    path("never.png"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("never.png")));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("deblur --input x.png").code, 1);
  {
    std::ofstream cfg(path("typo.ini"));
    cfg << "[train]\nlamda = 0.1\n";
  }
  EXPECT_EQ(run("make-data --config " + path("typo.ini")).code, 1);
  auto bytes = encode_model(load_model(path("model.sdm")));
  bytes[bytes.size() / 2] ^= 0x10;
  {
    std::ofstream out(path("bad.sdm"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const CommandResult r = run("inspect-model " + path("bad.sdm"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checksum"), std::string::npos) << r.err;
}

TEST_F(Cli, ZoomFactorMismatchWarnsAndRuns) {
  const CommandResult r = run("zoom --model " + path("model.sdm") + " --input " + path("ref.png") + " --zoom-factor 2 --output " +
                    path("zoomed.png"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  const Image z = read_image(path("zoomed.png"));
  EXPECT_EQ(z.width(), 96);
}

TEST_F(Cli, BenchMatchesDeblurAndLibrary) {
  const CommandResult r = run("bench --model " + path("model.sdm") + " --images " + path("ref.png") + " --seed 9 --output " +
                    path("bench.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(read_text(path("bench.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "experiment,image,method,lambda,psnr_in,psnr_out,isnr,runtime\r");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(csv, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    ASSERT_EQ(f.size(), 8u);
    rows.push_back(f);
  }
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "exp4");
  EXPECT_EQ(rows[0][2], "full");
  EXPECT_EQ(rows[1][2], "linear");
  for (const auto& f : rows) EXPECT_NEAR(std::stod(f[6]), std::stod(f[5]) - std::stod(f[4]), 2e-6);

  // Same cell through the library, then through the deblur command.
  const ModelFile mf = load_model(path("model.sdm"));
  const Image ref = read_image(path("ref.png"));
  Degradation d;
  d.noise_var = 49.0;
  const Image degraded = degrade(ref, d, derive_seed(9, stable_hash("exp4/ref.png")));
  const Image restored = deblur(mf.model, degraded);
  EXPECT_NEAR(std::stod(rows[0][5]), psnr(ref, restored), 1e-6);
  EXPECT_NEAR(std::stod(rows[0][4]), psnr(ref, degraded), 1e-6);

  write_image(degraded, path("degraded.pgm"), BitDepth::sixteen);
  const CommandResult dr = run("deblur --model " + path("model.sdm") + " --input " + path("degraded.pgm") + " --reference " +
                     path("ref.png") + " --output " + path("restored.png"));
  ASSERT_EQ(dr.code, 0) << dr.err;
  EXPECT_NE(dr.out.find("psnr_output:"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("restored.png")));
}
