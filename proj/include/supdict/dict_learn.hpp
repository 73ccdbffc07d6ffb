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

// Supervised dictionary learning for patch-based restoration.
//
// A sharp patch s is predicted from a blurry patch b (and its denoised
// version b~) as
//
//   s ~ W b~ + D_s a*(b, D_b),   a*(b, D_b) = argmin ||b - D_b a||^2 + lambda ||a||_1,
//
// and (D_b, D_s, W) are fitted by projected stochastic gradient descent on
// the mean squared prediction error. The gradient with respect to D_b goes
// through the Lasso solution by implicit differentiation on its support.

#include <supdict/patches.hpp>
#include <supdict/sparse_coding.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace supdict {

struct Model {
  Matrix dict_blurry;  // m_b^2 x k, columns in the unit ball
  Matrix dict_sharp;   // m_s^2 x k, unconstrained
  Matrix linear;       // m_s^2 x m_b^2
  double lambda = 0.0;
  int patch_size_sharp = 7;
  int patch_size_blurry = 11;
  // Multiplier from image intensities to the units patches are modeled in.
  double intensity_scale = 1.0 / 255.0;

  Index atoms() const { return dict_blurry.cols(); }
  Index sharp_dim() const { return static_cast<Index>(patch_size_sharp) * patch_size_sharp; }
  Index blurry_dim() const { return static_cast<Index>(patch_size_blurry) * patch_size_blurry; }

  void validate() const {
    if (patch_size_sharp < 1 || patch_size_blurry < 1 || patch_size_sharp % 2 == 0 ||
        patch_size_blurry % 2 == 0 || patch_size_blurry < patch_size_sharp)
      throw InvalidInput("model: patch sizes must be odd with m_b >= m_s");
    if (!(lambda > 0.0)) throw InvalidInput("model: lambda must be positive");
    if (!(intensity_scale > 0.0)) throw InvalidInput("model: intensity scale must be positive");
    if (dict_blurry.rows() != blurry_dim() || dict_sharp.rows() != sharp_dim() ||
        dict_sharp.cols() != dict_blurry.cols() || linear.rows() != sharp_dim() ||
        linear.cols() != blurry_dim())
      throw InvalidInput("model: matrix shapes do not match the patch geometry");
    if (!all_finite(dict_blurry) || !all_finite(dict_sharp) || !all_finite(linear))
      throw NumericError("model: non-finite parameters");
    if (!has_unit_bounded_columns(dict_blurry))
      throw InvalidInput("model: blurry dictionary has a column of norm > 1");
  }

  friend bool operator==(const Model&, const Model&) = default;
};

/// How the convex (W, D_s) problem with D_b frozen is solved before the
/// joint descent.
enum class StageOneSolver {
  closed_form,  // normal equations on features [b~; a*]
  sgd,          // the descent loop with the D_b update disabled
};

struct TrainConfig {
  Index atoms = 512;
  double lambda = 0.1;
  double mu = 1e-8;
  // Unset: picked from rho_grid by a pilot run.
  std::optional<double> rho;
  // Unset: T / 10.
  std::optional<double> t0;
  // D_b moves with rate dict_blurry_rate_scale * rho_t; 1 gives every block
  // the same rate.
  double dict_blurry_rate_scale = 1.0;
  Index batch_size = 500;
  int passes = 1;
  int init_epochs = 1;
  std::uint64_t seed = 0;

  std::vector<double> rho_grid = {1e-2, 1e-1, 1.0, 1e1, 1e2};
  Index pilot_samples = 10000;
  Index validation_max = 5000;
  double validation_fraction = 0.05;
  int log_every = 100;
  StageOneSolver stage_one = StageOneSolver::closed_form;
  // Steps for the stage-one descent loop (sgd mode). 0 means passes * n / batch.
  Index stage_one_steps = 0;
  LassoOptions lasso;

  void validate() const {
    if (atoms < 1) throw InvalidInput("config: atom count must be >= 1");
    if (!(lambda > 0.0)) throw InvalidInput("config: lambda must be positive");
    if (!(mu > 0.0)) throw InvalidInput("config: mu must be positive");
    if (rho && !(*rho >= 0.0)) throw InvalidInput("config: rho must be non-negative");
    if (t0 && !(*t0 >= 0.0)) throw InvalidInput("config: t0 must be non-negative");
    if (!(dict_blurry_rate_scale > 0.0)) throw InvalidInput("config: dict_blurry_rate_scale must be positive");
    if (batch_size < 1) throw InvalidInput("config: batch size must be >= 1");
    if (passes < 1 || init_epochs < 1) throw InvalidInput("config: passes must be >= 1");
    if (!rho && rho_grid.empty()) throw InvalidInput("config: empty learning-rate grid");
  }
};

inline double learning_rate(Index t, double rho, double t0) {
  if (t < 1) throw InvalidInput("learning_rate: step index starts at 1");
  return rho / (static_cast<double>(t) + t0);
}

inline double learning_rate(Index t, const TrainConfig& cfg) {
  return learning_rate(t, cfg.rho.value_or(0.0), cfg.t0.value_or(0.0));
}

// ---------------------------------------------------------------------------
// Unsupervised initialization of D_b

struct UnsupervisedReport {
  double initial_objective = 0.0;  // held-out mean of ||x - D a||^2 + lambda ||a||_1
  double final_objective = 0.0;
  Index held_out = 0;
};

/// Mean Lasso objective of `patches` (columns) coded over `dict`.
inline double mean_lasso_objective(const Eigen::MatrixXf& patches, const Matrix& dict, double lambda,
                                   const LassoOptions& options = {}) {
  if (patches.cols() == 0) return 0.0;
  const LassoSolver solver(dict, lambda, options);
  double total = 0.0;
  for (Index i = 0; i < patches.cols(); ++i) total += solver.solve(patches.col(i).cast<double>()).objective_value;
  return total / static_cast<double>(patches.cols());
}

/// Learns a blurry-patch dictionary with the classical reconstruction
/// objective, by mini-batch alternating minimization: code a batch, then
/// one block-coordinate pass over the atoms using the accumulated
/// sufficient statistics A = sum a a^T and B = sum x a^T, projecting each
/// atom onto the unit ball. Atoms that no code uses are re-seeded from
/// patches of the current batch.
///
/// The starting dictionary is `k` distinct random patches normalized to
/// unit norm. Deterministic in `cfg.seed`.
inline Matrix init_unsupervised(const Eigen::MatrixXf& patches, Index k, double lambda,
                                const TrainConfig& cfg, UnsupervisedReport* report = nullptr) {
  const Index n = patches.cols(), m = patches.rows();
  if (n < k) throw InvalidInput("init_unsupervised: need at least k patches");
  if (!(lambda > 0.0)) throw InvalidInput("init_unsupervised: lambda must be positive");
  std::mt19937_64 rng(cfg.seed ^ 0x5eed0001ULL);

  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  // Hold out a slice for the objective report when the data allows it.
  Index held = std::min<Index>(2000, n / 10);
  if (n - held < k) held = 0;
  std::vector<Index> held_idx(order.begin(), order.begin() + held);
  std::vector<Index> train_idx(order.begin() + held, order.end());
  Eigen::MatrixXf held_out(m, held);
  for (Index i = 0; i < held; ++i) held_out.col(i) = patches.col(held_idx[static_cast<size_t>(i)]);

  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&] {
    Vector v(m);
    for (Index i = 0; i < m; ++i) v[i] = gauss(rng);
    return Vector(v / v.norm());
  };

  Matrix dict(m, k);
  for (Index j = 0; j < k; ++j) {
    Vector col = patches.col(train_idx[static_cast<size_t>(j)]).cast<double>();
    const double norm = col.norm();
    dict.col(j) = norm > 0.0 ? Vector(col / norm) : random_unit();
  }

  const Eigen::MatrixXf& eval_set = held > 0 ? held_out : patches;
  if (report) {
    report->held_out = held;
    report->initial_objective = mean_lasso_objective(eval_set, dict, lambda, cfg.lasso);
  }

  Matrix stat_a = Matrix::Zero(k, k);
  Matrix stat_b = Matrix::Zero(m, k);
  const Index batch = std::max<Index>(1, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.init_epochs; ++epoch) {
    if (epoch > 0) std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (size_t start = 0; start < train_idx.size(); start += static_cast<size_t>(batch)) {
      const size_t stop = std::min(train_idx.size(), start + static_cast<size_t>(batch));
      const Index bs = static_cast<Index>(stop - start);
      Matrix xb(m, bs);
      for (Index i = 0; i < bs; ++i) xb.col(i) = patches.col(train_idx[start + static_cast<size_t>(i)]).cast<double>();
      const LassoSolver solver(dict, lambda, cfg.lasso);
      const Matrix corr = dict.transpose() * xb;
      Matrix codes(k, bs);
      for (Index i = 0; i < bs; ++i) codes.col(i) = solver.solve_from_correlation(corr.col(i)).coefficients;
      stat_a.noalias() += codes * codes.transpose();
      stat_b.noalias() += xb * codes.transpose();

      for (Index j = 0; j < k; ++j) {
        if (stat_a(j, j) > 1e-12) {
          Vector u = dict.col(j) + (stat_b.col(j) - dict * stat_a.col(j)) / stat_a(j, j);
          const double norm = u.norm();
          dict.col(j) = norm > 1.0 ? Vector(u / norm) : u;
        } else {
          std::uniform_int_distribution<Index> pick(0, bs - 1);
          Vector col = xb.col(pick(rng));
          const double norm = col.norm();
          dict.col(j) = norm > 0.0 ? Vector(col / norm) : random_unit();
        }
      }
    }
  }
  if (report) report->final_objective = mean_lasso_objective(eval_set, dict, lambda, cfg.lasso);
  return dict;
}

// ---------------------------------------------------------------------------
// Linear predictor

/// Ridge regression of sharp patches on denoised blurry patches:
/// W = argmin (1/n) sum ||s_i - W b~_i||^2 + mu ||W||_F^2, via the normal
/// equations (B B^T / n + mu I) W^T = B S^T / n.
inline Matrix ridge_fit(const PatchPairSet& pairs, double mu) {
  pairs.validate();
  const Index n = pairs.size();
  if (n < 1) throw InvalidInput("ridge_fit: empty training set");
  if (!(mu > 0.0)) throw InvalidInput("ridge_fit: mu must be positive");
  const Index mb = pairs.blurry_dim(), ms = pairs.sharp_dim();
  Matrix gram = Matrix::Zero(mb, mb), cross = Matrix::Zero(mb, ms);
  constexpr Index chunk = 4096;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    const Matrix b = pairs.blurry_denoised.middleCols(start, len).cast<double>();
    const Matrix s = pairs.sharp.middleCols(start, len).cast<double>();
    gram.noalias() += b * b.transpose();
    cross.noalias() += b * s.transpose();
  }
  if (!all_finite(gram) || !all_finite(cross)) throw NumericError("ridge_fit: non-finite accumulation");
  gram /= static_cast<double>(n);
  cross /= static_cast<double>(n);
  gram.diagonal().array() += mu;
  const Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericError("ridge_fit: regularized Gram matrix not positive definite");
  Matrix w = llt.solve(cross).transpose();
  if (!all_finite(w)) throw NumericError("ridge_fit: non-finite solution");
  return w;
}

// ---------------------------------------------------------------------------
// Per-sample gradient pieces

/// Implicit-differentiation vector: zero off the support and
/// beta_L = -(D_bL^T D_bL)^{-1} D_sL^T r on it, with r the prediction
/// residual s - D_s a* - W b~.
inline Vector compute_beta(const SparseCode& code, const Matrix& dict_blurry, const Matrix& dict_sharp,
                           const Vector& residual) {
  const Index k = dict_blurry.cols();
  Vector beta = Vector::Zero(k);
  const auto& support = code.active_set;
  if (support.empty()) return beta;
  const Index s = static_cast<Index>(support.size());
  Matrix gram(s, s);
  Vector rhs(s);
  for (Index a = 0; a < s; ++a) {
    const Index ja = support[static_cast<size_t>(a)];
    rhs[a] = -dict_sharp.col(ja).dot(residual);
    for (Index b = 0; b < s; ++b) gram(a, b) = dict_blurry.col(ja).dot(dict_blurry.col(support[static_cast<size_t>(b)]));
  }
  const Eigen::LDLT<Matrix> ldlt(gram);
  // Condition number past ~1e12 is treated as singular.
  if (s > dict_blurry.rows() || !well_conditioned(ldlt))
    throw DegenerateActiveSet("compute_beta: active-set Gram matrix is numerically singular (|L| = " +
                              std::to_string(s) + ")");
  const Vector sol = ldlt.solve(rhs);
  if (!all_finite(sol)) throw DegenerateActiveSet("compute_beta: non-finite solution");
  for (Index a = 0; a < s; ++a) beta[support[static_cast<size_t>(a)]] = sol[a];
  return beta;
}

inline Vector compute_beta(const SparseCode& code, const Matrix& dict_blurry, const Matrix& dict_sharp,
                           const Matrix& linear, const Vector& blurry_denoised, const Vector& sharp) {
  const Vector residual = sharp - dict_sharp * code.coefficients - linear * blurry_denoised;
  return compute_beta(code, dict_blurry, dict_sharp, residual);
}

/// Loss of one sample: ||s - W b~ - D_s a||^2 for a given code.
inline double sample_loss(const Model& model, const Vector& alpha, const Vector& blurry_denoised,
                          const Vector& sharp) {
  return (sharp - model.linear * blurry_denoised - model.dict_sharp * alpha).squaredNorm();
}

/// Descent directions (negative gradients of the sample loss) for one pair.
struct Directions {
  Matrix linear;
  Matrix dict_sharp;
  Matrix dict_blurry;
};

/// The three descent directions for one training pair. With r the residual
/// and beta from compute_beta:
///   -grad_W   = 2 r b~^T
///   -grad_D_s = 2 r a*^T
///   -grad_D_b = -2 (b beta^T - D_b a* beta^T - D_b beta a*^T)
/// The D_b expression is the one the finite-difference tests check.
inline Directions sample_directions(const Model& model, const Vector& blurry, const Vector& blurry_denoised,
                                    const Vector& sharp, const LassoOptions& options = {}) {
  const SparseCode code = lasso_solve(blurry, model.dict_blurry, model.lambda, options);
  const Vector& alpha = code.coefficients;
  const Vector r = sharp - model.linear * blurry_denoised - model.dict_sharp * alpha;
  const Vector beta = compute_beta(code, model.dict_blurry, model.dict_sharp, r);
  Directions d;
  d.linear = 2.0 * r * blurry_denoised.transpose();
  d.dict_sharp = 2.0 * r * alpha.transpose();
  d.dict_blurry = -2.0 * (blurry * beta.transpose() - model.dict_blurry * alpha * beta.transpose() -
                          model.dict_blurry * beta * alpha.transpose());
  return d;
}

// ---------------------------------------------------------------------------
// Stochastic gradient step

struct StepStats {
  double learning_rate = 0.0;
  double batch_objective = 0.0;  // mean loss over used samples, before the update
  Index used = 0;
  Index skipped = 0;
  Index support_mismatch = 0;
};

struct StepOptions {
  bool update_dict_blurry = true;
  double dict_blurry_rate_scale = 1.0;
  // Re-solve the first sample of the batch in reverse coordinate order and
  // count support disagreements (Lasso uniqueness probe).
  bool check_uniqueness = true;
};

/// One projected mini-batch step: every sample contributes its descent
/// directions, the batch average is scaled by rho / (t + t0), and D_b is
/// projected back onto the unit-ball constraint. Samples whose Lasso does
/// not converge or whose active set is degenerate are skipped.
inline Model sgd_step(const Model& model, const PatchPairSet& batch, Index t, double rho, double t0,
                      const LassoOptions& lasso, const StepOptions& opts = {}, StepStats* stats = nullptr) {
  const Index n = batch.size();
  if (n < 1) throw EmptyBatch("sgd_step: empty batch");
  const Index k = model.atoms();
  const LassoSolver solver(model.dict_blurry, model.lambda, lasso);
  const Matrix blurry = batch.blurry.cast<double>();
  const Matrix denoised = batch.blurry_denoised.cast<double>();
  const Matrix sharp = batch.sharp.cast<double>();
  const Matrix corr = model.dict_blurry.transpose() * blurry;

  // Per-sample results land in their own columns; the reduction below is a
  // fixed sequence of matrix products.
  Matrix codes = Matrix::Zero(k, n), betas = Matrix::Zero(k, n), resid = Matrix::Zero(sharp.rows(), n);
  StepStats st;
  for (Index i = 0; i < n; ++i) {
    try {
      SparseCode code = solver.solve_from_correlation(corr.col(i));
      const Vector r = sharp.col(i) - model.linear * denoised.col(i) - model.dict_sharp * code.coefficients;
      if (opts.update_dict_blurry) betas.col(i) = compute_beta(code, model.dict_blurry, model.dict_sharp, r);
      if (opts.check_uniqueness && i == 0) {
        LassoOptions rev = lasso;
        rev.reverse_order = true;
        const LassoSolver other(model.dict_blurry, model.lambda, rev);
        if (other.solve_from_correlation(corr.col(i)).active_set != code.active_set) ++st.support_mismatch;
      }
      codes.col(i) = code.coefficients;
      resid.col(i) = r;
    } catch (const ConvergenceError&) {
      ++st.skipped;
    } catch (const DegenerateActiveSet&) {
      ++st.skipped;
    }
  }
  st.used = n - st.skipped;
  if (st.used == 0) throw EmptyBatch("sgd_step: every sample in the batch was skipped");
  // Skipped columns are all-zero and drop out of the products.
  st.batch_objective = resid.colwise().squaredNorm().sum() / static_cast<double>(st.used);
  st.learning_rate = learning_rate(t, rho, t0);
  const double step = st.learning_rate * 2.0 / static_cast<double>(st.used);

  Model next = model;
  if (step != 0.0) {
    next.linear.noalias() += step * (resid * denoised.transpose());
    next.dict_sharp.noalias() += step * (resid * codes.transpose());
    if (opts.update_dict_blurry) {
      const Matrix grad = blurry * betas.transpose() - model.dict_blurry * (codes * betas.transpose()) -
                          model.dict_blurry * (betas * codes.transpose());
      next.dict_blurry.noalias() -= opts.dict_blurry_rate_scale * step * grad;
    }
  }
  next.dict_blurry = project_unit_columns(std::move(next.dict_blurry));
  if (stats) *stats = st;
  return next;
}

inline Model sgd_step(const Model& model, const PatchPairSet& batch, Index t, const TrainConfig& cfg,
                      StepStats* stats = nullptr) {
  return sgd_step(model, batch, t, cfg.rho.value_or(0.0), cfg.t0.value_or(0.0), cfg.lasso, {}, stats);
}

// ---------------------------------------------------------------------------
// Training driver

/// Mean of ||s - W b~ - D_s a*(b)||^2 over a pair set.
inline double prediction_objective(const Model& model, const PatchPairSet& data, const LassoOptions& lasso = {}) {
  const Index n = data.size();
  if (n == 0) return 0.0;
  const LassoSolver solver(model.dict_blurry, model.lambda, lasso);
  double total = 0.0;
  constexpr Index chunk = 1024;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    const Matrix b = data.blurry.middleCols(start, len).cast<double>();
    const Matrix corr = model.dict_blurry.transpose() * b;
    Matrix pred = model.linear * data.blurry_denoised.middleCols(start, len).cast<double>();
    for (Index i = 0; i < len; ++i) {
      const SparseCode code = solver.solve_from_correlation(corr.col(i));
      for (Index j : code.active_set) pred.col(i) += model.dict_sharp.col(j) * code.coefficients[j];
    }
    total += (data.sharp.middleCols(start, len).cast<double>() - pred).squaredNorm();
  }
  return total / static_cast<double>(n);
}

struct TrainLogEntry {
  std::string stage;  // "stage1", "stage2" or "pilot"
  Index step = 0;
  double learning_rate = 0.0;
  double batch_objective = std::numeric_limits<double>::quiet_NaN();
  double validation_objective = std::numeric_limits<double>::quiet_NaN();
  Index skipped = 0;
  Index support_mismatch = 0;
  double rho = 0.0;
};

inline std::string format_log_line(const TrainLogEntry& e) {
  std::ostringstream os;
  os << std::setprecision(10) << "stage=" << e.stage << " step=" << e.step << " rho=" << e.rho
     << " rho_t=" << e.learning_rate << " batch_objective=" << e.batch_objective
     << " validation_objective=" << e.validation_objective << " skipped=" << e.skipped
     << " support_mismatch=" << e.support_mismatch;
  return os.str();
}

struct TrainResult {
  Model model;
  std::vector<TrainLogEntry> log;
  double initial_objective = 0.0;    // ridge W, D_s = 0
  double stage_one_objective = 0.0;  // after the convex (W, D_s) fit
  double final_objective = 0.0;      // after the joint descent
  double rho = 0.0;
  double t0 = 0.0;
  Index steps = 0;
  Index skipped = 0;
  Index support_mismatch = 0;
  Index train_size = 0;
  Index validation_size = 0;
};

namespace detail {

// Exact minimizer of mean ||s - W b~ - D_s a||^2 (+ mu on all entries) with
// the codes a fixed, through the joint normal equations.
inline void fit_linear_and_sharp(Model& model, const PatchPairSet& data, double mu, const LassoOptions& lasso) {
  const Index n = data.size(), mb = data.blurry_dim(), k = model.atoms();
  const Index dim = mb + k;
  const LassoSolver solver(model.dict_blurry, model.lambda, lasso);
  Matrix gram = Matrix::Zero(dim, dim), cross = Matrix::Zero(dim, data.sharp_dim());
  constexpr Index chunk = 2048;
  for (Index start = 0; start < n; start += chunk) {
    const Index len = std::min(chunk, n - start);
    Matrix feat(dim, len);
    feat.topRows(mb) = data.blurry_denoised.middleCols(start, len).cast<double>();
    const Matrix corr = model.dict_blurry.transpose() * data.blurry.middleCols(start, len).cast<double>();
    for (Index i = 0; i < len; ++i) feat.bottomRows(k).col(i) = solver.solve_from_correlation(corr.col(i)).coefficients;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(feat);
    cross.noalias() += feat * data.sharp.middleCols(start, len).cast<double>().transpose();
  }
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  gram /= static_cast<double>(n);
  cross /= static_cast<double>(n);
  gram.diagonal().array() += mu;
  const Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw NumericError("stage one: normal equations failed");
  const Matrix theta = ldlt.solve(cross).transpose();
  if (!all_finite(theta)) throw NumericError("stage one: non-finite solution");
  model.linear = theta.leftCols(mb);
  model.dict_sharp = theta.rightCols(k);
}

struct DescentRun {
  Index steps = 0;
  Index skipped = 0;
  Index support_mismatch = 0;
};

// Runs `steps` mini-batch steps over `data`, sampling without replacement
// within each epoch. Validation is logged every `log_every` steps and at
// the end; a non-finite validation objective aborts.
inline DescentRun run_descent(Model& model, const PatchPairSet& data, const PatchPairSet* validation,
                              Index steps, double rho, double t0, const TrainConfig& cfg, bool update_db,
                              const std::string& stage, std::mt19937_64& rng, std::vector<TrainLogEntry>* log,
                              const std::function<void(const TrainLogEntry&)>& sink) {
  DescentRun run;
  const Index n = data.size();
  const Index batch = std::min(cfg.batch_size, n);
  std::vector<Index> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  size_t cursor = 0;
  StepOptions opts;
  opts.update_dict_blurry = update_db;
  opts.dict_blurry_rate_scale = cfg.dict_blurry_rate_scale;
  std::vector<Index> cols;
  for (Index t = 1; t <= steps; ++t) {
    cols.clear();
    while (static_cast<Index>(cols.size()) < batch) {
      if (cursor == perm.size()) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      cols.push_back(perm[cursor++]);
    }
    StepStats st;
    model = sgd_step(model, data.select(cols), t, rho, t0, cfg.lasso, opts, &st);
    run.skipped += st.skipped;
    run.support_mismatch += st.support_mismatch;
    ++run.steps;
    const bool report = validation && cfg.log_every > 0 && (t % cfg.log_every == 0 || t == steps);
    if (report) {
      TrainLogEntry e;
      e.stage = stage;
      e.step = t;
      e.rho = rho;
      e.learning_rate = st.learning_rate;
      e.batch_objective = st.batch_objective;
      e.validation_objective = prediction_objective(model, *validation, cfg.lasso);
      e.skipped = run.skipped;
      e.support_mismatch = run.support_mismatch;
      if (log) log->push_back(e);
      if (sink) sink(e);
      if (!std::isfinite(e.validation_objective))
        throw NumericError("training diverged: validation objective is not finite at step " + std::to_string(t));
    }
  }
  return run;
}

}  // namespace detail

/// Two-stage supervised training.
///
/// (i) D_b = init_b is frozen, W starts from the ridge fit and D_s from
///     zero, and (W, D_s) are fitted on the (convex) restricted problem.
/// (ii) Joint projected descent over (D_b, D_s, W) for passes * n / batch
///     steps with rate rho / (t + t0).
///
/// A fixed validation split (validation_fraction of the data, capped at
/// validation_max) is held out and its objective logged every log_every
/// steps. When cfg.rho is unset, each value of cfg.rho_grid is tried on a
/// pilot run over the first pilot_samples training pairs and the one with
/// the lowest pilot validation objective is used.
inline TrainResult train_supervised(const PatchPairSet& data, const Matrix& init_b, const TrainConfig& cfg,
                                    int patch_size_sharp, int patch_size_blurry,
                                    const std::function<void(const TrainLogEntry&)>& sink = {}) {
  cfg.validate();
  data.validate();
  if (data.size() < 1) throw InvalidInput("train_supervised: empty training set");
  if (!has_unit_bounded_columns(init_b)) throw InvalidInput("train_supervised: initial D_b is not feasible");
  if (init_b.rows() != data.blurry_dim()) throw InvalidInput("train_supervised: D_b rows do not match patches");

  TrainResult result;
  std::mt19937_64 rng(cfg.seed ^ 0x5eed0002ULL);
  const Index n = data.size();
  std::vector<Index> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Index nval = std::min<Index>(cfg.validation_max,
                               static_cast<Index>(std::ceil(cfg.validation_fraction * static_cast<double>(n))));
  if (n - nval < 1) nval = 0;
  std::vector<Index> val_idx(perm.begin(), perm.begin() + nval), train_idx(perm.begin() + nval, perm.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const PatchPairSet train = data.select(train_idx);
  // Tiny sets validate on the training data itself.
  const PatchPairSet validation = nval > 0 ? data.select(val_idx) : train;
  result.train_size = train.size();
  result.validation_size = validation.size();

  Model model;
  model.patch_size_sharp = patch_size_sharp;
  model.patch_size_blurry = patch_size_blurry;
  model.lambda = cfg.lambda;
  model.dict_blurry = init_b;
  model.linear = ridge_fit(train, cfg.mu);
  model.dict_sharp = Matrix::Zero(train.sharp_dim(), init_b.cols());
  model.validate();
  result.initial_objective = prediction_objective(model, validation, cfg.lasso);

  const Index batch = std::min(cfg.batch_size, train.size());
  const Index steps =
      std::max<Index>(1, static_cast<Index>(cfg.passes) * train.size() / batch);
  const double t0 = cfg.t0.value_or(static_cast<double>(steps) / 10.0);
  result.t0 = t0;

  if (cfg.stage_one == StageOneSolver::closed_form) {
    detail::fit_linear_and_sharp(model, train, cfg.mu, cfg.lasso);
  } else {
    const Index s1 = cfg.stage_one_steps > 0 ? cfg.stage_one_steps : steps;
    const double s1_t0 = cfg.t0.value_or(static_cast<double>(s1) / 10.0);
    const double s1_rho = cfg.rho.value_or(cfg.rho_grid.front());
    auto r = detail::run_descent(model, train, &validation, s1, s1_rho, s1_t0, cfg, false, "stage1", rng,
                                 &result.log, sink);
    result.skipped += r.skipped;
  }
  result.stage_one_objective = prediction_objective(model, validation, cfg.lasso);
  {
    TrainLogEntry e;
    e.stage = "stage1";
    e.validation_objective = result.stage_one_objective;
    result.log.push_back(e);
    if (sink) sink(e);
  }

  double rho = 0.0;
  if (cfg.rho) {
    rho = *cfg.rho;
  } else {
    const Index pilot_n = std::min(cfg.pilot_samples, train.size());
    std::vector<Index> pilot_idx(static_cast<size_t>(pilot_n));
    std::iota(pilot_idx.begin(), pilot_idx.end(), Index{0});
    const PatchPairSet pilot = train.select(pilot_idx);
    const Index pilot_batch = std::min(cfg.batch_size, pilot_n);
    const Index pilot_steps = std::max<Index>(1, pilot_n / pilot_batch);
    double best = std::numeric_limits<double>::infinity();
    for (double candidate : cfg.rho_grid) {
      Model trial = model;
      std::mt19937_64 pilot_rng(cfg.seed ^ 0x5eed0003ULL);
      double objective;
      try {
        // Same t0 as the full run, so the pilot sees its early rates.
        detail::run_descent(trial, pilot, nullptr, pilot_steps, candidate, t0, cfg, true, "pilot", pilot_rng,
                            nullptr, {});
        objective = prediction_objective(trial, validation, cfg.lasso);
      } catch (const NumericError&) {
        objective = std::numeric_limits<double>::infinity();
      }
      TrainLogEntry e;
      e.stage = "pilot";
      e.step = pilot_steps;
      e.rho = candidate;
      e.validation_objective = objective;
      result.log.push_back(e);
      if (sink) sink(e);
      if (std::isfinite(objective) && objective < best) {
        best = objective;
        rho = candidate;
      }
    }
    if (!std::isfinite(best)) throw NumericError("train_supervised: every pilot learning rate diverged");
  }
  result.rho = rho;

  auto run = detail::run_descent(model, train, &validation, steps, rho, t0, cfg, true, "stage2", rng, &result.log,
                                 sink);
  result.steps = run.steps;
  result.skipped += run.skipped;
  result.support_mismatch = run.support_mismatch;
  result.final_objective = prediction_objective(model, validation, cfg.lasso);
  if (!std::isfinite(result.final_objective)) throw NumericError("train_supervised: final objective not finite");
  model.validate();
  result.model = std::move(model);
  return result;
}

}  // namespace supdict
