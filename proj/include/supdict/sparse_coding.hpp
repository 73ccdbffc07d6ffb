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

// Lasso sparse coding of single signals over a fixed dictionary:
//
//   min_a  ||x - D a||_2^2 + lambda ||a||_1
//
// Note the objective carries no 1/2 factor, so the smooth gradient is
// 2 D^T (D a - x) and the soft threshold sits at lambda / 2.

#include <supdict/common.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace supdict {

struct LassoOptions {
  double kkt_tolerance = 1e-6;
  double zero_tolerance = 1e-10;
  int max_sweeps = 10000;
  // Visit coordinates last-to-first. Used to cross-check uniqueness.
  bool reverse_order = false;
};

struct SparseCode {
  Vector coefficients;
  std::vector<Index> active_set;  // ascending
  double objective_value = 0.0;
  int sweeps = 0;
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

inline double lasso_objective(const Vector& x, const Matrix& dict, double lambda,
                              const Vector& alpha) {
  return (x - dict * alpha).squaredNorm() + lambda * alpha.lpNorm<1>();
}

/// Maximum violation of the Lasso optimality conditions at `alpha`.
///
/// With g = 2 D^T (D alpha - x): for alpha[j] != 0 the violation is
/// |g[j] + lambda sign(alpha[j])|, for alpha[j] == 0 it is
/// max(0, |g[j]| - lambda). Zero exactly at an optimum.
inline double lasso_kkt_residual(const Vector& x, const Matrix& dict, double lambda,
                                 const Vector& alpha) {
  if (dict.rows() != x.size() || dict.cols() != alpha.size())
    throw InvalidInput("lasso_kkt_residual: dimension mismatch");
  const Vector grad = 2.0 * (dict.transpose() * (dict * alpha - x));
  double worst = 0.0;
  for (Index j = 0; j < alpha.size(); ++j) {
    double v;
    if (alpha[j] != 0.0)
      v = std::abs(grad[j] + lambda * (alpha[j] > 0 ? 1.0 : -1.0));
    else
      v = std::max(0.0, std::abs(grad[j]) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Rejects LDLT factorizations of (numerically) singular Gram matrices:
/// the reciprocal condition estimate alone misses exact zero pivots, which
/// Eigen's solve silently maps to zero components.
inline bool well_conditioned(const Eigen::LDLT<Matrix>& ldlt, double threshold = 1e-12) {
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() >= threshold)) return false;
  const Vector d = ldlt.vectorD().cwiseAbs();
  return d.size() == 0 || d.minCoeff() > threshold * d.maxCoeff();
}

namespace detail {

// Cholesky factor L L^T of the Gram matrix restricted to an ordered index
// list, kept current as indices enter (forward substitution) and leave
// (Givens rotations), so each change costs O(s^2) instead of O(s^3).
class SupportCholesky {
 public:
  SupportCholesky(const Matrix& gram, Index capacity) : gram_(gram), l_(capacity, capacity) {}

  const std::vector<Index>& indices() const { return idx_; }
  Index size() const { return static_cast<Index>(idx_.size()); }

  // Returns false, leaving the factor unchanged, when the new pivot is
  // negligible: the extended Gram matrix is numerically singular.
  bool append(Index j) {
    const Index s = size();
    if (s == l_.rows()) return false;
    Vector col(s);
    for (Index a = 0; a < s; ++a) col[a] = gram_(idx_[static_cast<size_t>(a)], j);
    if (s > 0) l_.topLeftCorner(s, s).triangularView<Eigen::Lower>().solveInPlace(col);
    const double pivot = gram_(j, j) - col.squaredNorm();
    if (!(pivot > kPivotFloor * gram_(j, j))) return false;
    l_.row(s).head(s) = col.transpose();
    l_(s, s) = std::sqrt(pivot);
    idx_.push_back(j);
    return true;
  }

  void remove(Index pos) {
    const Index s = size();
    for (Index r = pos; r + 1 < s; ++r) l_.row(r).head(s) = l_.row(r + 1).head(s);
    // Rows pos..s-2 now carry one superdiagonal entry each.
    for (Index r = pos; r + 1 < s; ++r) {
      const double a = l_(r, r), b = l_(r, r + 1);
      const double h = std::hypot(a, b);
      const double c = a / h, sn = b / h;
      for (Index i = r; i + 1 < s; ++i) {
        const double x = l_(i, r), y = l_(i, r + 1);
        l_(i, r) = c * x + sn * y;
        l_(i, r + 1) = -sn * x + c * y;
      }
      l_(r, r + 1) = 0.0;
    }
    idx_.erase(idx_.begin() + pos);
  }

  Vector solve(const Vector& rhs) const {
    const Index s = size();
    const auto l = l_.topLeftCorner(s, s).triangularView<Eigen::Lower>();
    Vector x = l.solve(rhs);
    l.transpose().solveInPlace(x);
    return x;
  }

 private:
  static constexpr double kPivotFloor = 1e-12;
  const Matrix& gram_;
  Matrix l_;
  std::vector<Index> idx_;
};

}  // namespace detail

/// Coordinate-descent Lasso solver bound to one dictionary.
///
/// The Gram matrix D^T D is computed once at construction so that many
/// signals can be coded against the same dictionary. `solve` is const and
/// touches no shared state, so one solver may serve concurrent callers.
///
/// Each iteration is one exact coordinate minimization on the coordinate
/// that violates the optimality conditions most (which may grow or shrink
/// the support), followed by an exact minimization over the current
/// support with signs held fixed. The support step removes the slow linear
/// tail coordinate descent has on coherent dictionaries, such as those
/// learned from smooth image patches. `max_sweeps` caps the iterations.
class LassoSolver {
 public:
  LassoSolver(Matrix dict, double lambda, LassoOptions options = {})
      : dict_(std::move(dict)), lambda_(lambda), options_(options) {
    if (!(lambda_ > 0.0) || !std::isfinite(lambda_))
      throw InvalidInput("lasso: lambda must be positive and finite");
    if (!all_finite(dict_)) throw InvalidInput("lasso: dictionary has non-finite entries");
    gram_ = dict_.transpose() * dict_;
  }

  const Matrix& dictionary() const { return dict_; }
  const Matrix& gram() const { return gram_; }
  double lambda() const { return lambda_; }
  const LassoOptions& options() const { return options_; }

  SparseCode solve(const Vector& x) const {
    if (x.size() != dict_.rows())
      throw InvalidInput("lasso: signal length " + std::to_string(x.size()) +
                         " does not match dictionary rows " + std::to_string(dict_.rows()));
    if (!all_finite(x)) throw InvalidInput("lasso: signal has non-finite entries");
    Vector corr = dict_.transpose() * x;
    SparseCode code = solve_from_correlation(corr);
    code.objective_value = lasso_objective(x, dict_, lambda_, code.coefficients);
    return code;
  }

  /// Solves given corr = D^T x. The objective value is left at zero since
  /// it needs ||x||^2; `solve` fills it in.
  SparseCode solve_from_correlation(const Vector& corr) const {
    const Index k = gram_.cols();
    const double half_lambda = 0.5 * lambda_;
    const double tol = options_.kkt_tolerance;

    Vector alpha = Vector::Zero(k);
    Vector q = corr;  // q = corr - G alpha
    std::vector<char> in_support(static_cast<size_t>(k), 0);
    std::vector<Index> support;
    int sweeps = 0;
    detail::SupportCholesky factor(gram_, std::min(k, dict_.rows()));
    std::vector<char> in_factor(static_cast<size_t>(k), 0);

    auto update = [&](Index j) {
      const double gjj = gram_(j, j);
      const double old = alpha[j];
      const double fresh = gjj > 0.0 ? soft_threshold(q[j] + gjj * old, half_lambda) / gjj : 0.0;
      if (fresh != old) {
        q.noalias() -= gram_.col(j) * (fresh - old);
        alpha[j] = fresh;
        if (fresh != 0.0 && !in_support[static_cast<size_t>(j)]) {
          in_support[static_cast<size_t>(j)] = 1;
          support.push_back(j);
        }
      }
    };
    auto refresh = [&] {
      q = corr;
      for (Index j : support)
        if (alpha[j] != 0.0) q.noalias() -= gram_.col(j) * alpha[j];
    };
    auto violation = [&](Index j) {
      const double g = -2.0 * q[j];
      if (alpha[j] != 0.0) return std::abs(g + lambda_ * (alpha[j] > 0 ? 1.0 : -1.0));
      return std::max(0.0, std::abs(g) - lambda_);
    };
    auto full_violation = [&] {
      double worst = 0.0;
      for (Index j = 0; j < k; ++j) worst = std::max(worst, violation(j));
      return worst;
    };
    auto prune = [&] {
      support.erase(std::remove_if(support.begin(), support.end(),
                                   [&](Index j) {
                                     if (alpha[j] != 0.0) return false;
                                     in_support[static_cast<size_t>(j)] = 0;
                                     return true;
                                   }),
                    support.end());
    };

    double worst = full_violation();
    while (worst > tol && sweeps < options_.max_sweeps) {
      // Greedy (Gauss-Southwell) coordinate step on the worst violator.
      Index pick = 0;
      double top = -1.0;
      for (Index i = 0; i < k; ++i) {
        const Index j = options_.reverse_order ? k - 1 - i : i;
        const double v = violation(j);
        if (v > top) {
          top = v;
          pick = j;
        }
      }
      update(pick);
      ++sweeps;
      prune();

      // Converge on the current support: exact sign-constrained steps when
      // the support Gram matrix is well conditioned, coordinate sweeps
      // otherwise.
      if (!polish(corr, support, in_support, alpha, factor, in_factor)) {
        for (int inner = 0; inner < kInnerSweeps && !support.empty(); ++inner) {
          if (options_.reverse_order)
            for (auto it = support.rbegin(); it != support.rend(); ++it) update(*it);
          else
            for (Index j : support) update(j);
          prune();
          double local = 0.0;
          for (Index j : support) local = std::max(local, violation(j));
          if (local <= 0.1 * tol) break;
        }
      }
      refresh();
      worst = full_violation();
    }

    for (Index j = 0; j < k; ++j)
      if (std::abs(alpha[j]) < options_.zero_tolerance) alpha[j] = 0.0;
    prune();
    refresh();
    worst = full_violation();
    if (worst > tol)
      throw ConvergenceError("lasso: KKT violation " + std::to_string(worst) + " after " +
                                 std::to_string(sweeps) + " sweeps",
                             worst);

    SparseCode code;
    code.coefficients = std::move(alpha);
    std::sort(support.begin(), support.end());
    code.active_set = std::move(support);
    code.sweeps = sweeps;
    return code;
  }

 private:
  static constexpr int kInnerSweeps = 1000;

  // Minimizes the objective over the current support with the signs held
  // fixed: solve G_SS a_S = corr_S - (lambda/2) sign_S and, if some
  // coefficient would change sign, move only up to the first zero
  // crossing, drop that coordinate and repeat. Every step lowers the
  // objective. Returns false if the support Gram matrix is numerically
  // singular.
  bool polish(const Vector& corr, std::vector<Index>& support, std::vector<char>& in_support, Vector& alpha,
              detail::SupportCholesky& factor, std::vector<char>& in_factor) const {
    for (Index pos = factor.size() - 1; pos >= 0; --pos) {
      const Index j = factor.indices()[static_cast<size_t>(pos)];
      if (!in_support[static_cast<size_t>(j)]) {
        factor.remove(pos);
        in_factor[static_cast<size_t>(j)] = 0;
      }
    }
    for (Index j : support) {
      if (in_factor[static_cast<size_t>(j)]) continue;
      if (!factor.append(j)) return false;
      in_factor[static_cast<size_t>(j)] = 1;
    }
    while (factor.size() > 0) {
      const Index s = factor.size();
      const auto& idx = factor.indices();
      Vector rhs(s);
      for (Index a = 0; a < s; ++a) {
        const Index ja = idx[static_cast<size_t>(a)];
        rhs[a] = corr[ja] - 0.5 * lambda_ * (alpha[ja] > 0 ? 1.0 : -1.0);
      }
      const Vector sol = factor.solve(rhs);
      if (!all_finite(sol)) return false;

      double step = 1.0;
      Index blocked = -1;
      for (Index a = 0; a < s; ++a) {
        const double prev = alpha[idx[static_cast<size_t>(a)]];
        if (sol[a] == 0.0 || (sol[a] > 0) != (prev > 0)) {
          const double t = prev / (prev - sol[a]);
          if (t < step || blocked < 0) {
            step = t;
            blocked = a;
          }
        }
      }
      if (blocked < 0) {
        for (Index a = 0; a < s; ++a) alpha[idx[static_cast<size_t>(a)]] = sol[a];
        return true;
      }
      for (Index a = 0; a < s; ++a) {
        const Index ja = idx[static_cast<size_t>(a)];
        alpha[ja] += step * (sol[a] - alpha[ja]);
      }
      const Index jb = idx[static_cast<size_t>(blocked)];
      alpha[jb] = 0.0;
      in_support[static_cast<size_t>(jb)] = 0;
      in_factor[static_cast<size_t>(jb)] = 0;
      support.erase(std::find(support.begin(), support.end(), jb));
      factor.remove(blocked);
    }
    return true;
  }

  Matrix dict_;
  Matrix gram_;
  double lambda_;
  LassoOptions options_;
};

inline SparseCode lasso_solve(const Vector& x, const Matrix& dict, double lambda,
                              const LassoOptions& options = {}) {
  return LassoSolver(dict, lambda, options).solve(x);
}

/// Euclidean projection onto dictionaries whose columns have l2 norm <= 1.
inline Matrix project_unit_columns(Matrix dict) {
  if (!all_finite(dict)) throw InvalidInput("project_unit_columns: non-finite entries");
  for (Index j = 0; j < dict.cols(); ++j) {
    const double norm = dict.col(j).norm();
    // Anything within a few ulps of 1 already counts as feasible; this is
    // what makes the projection idempotent bit-for-bit.
    if (norm > 1.0 + 1e-15) dict.col(j) /= norm;
  }
  return dict;
}

inline bool has_unit_bounded_columns(const Matrix& dict, double slack = 1e-12) {
  for (Index j = 0; j < dict.cols(); ++j)
    if (dict.col(j).norm() > 1.0 + slack) return false;
  return true;
}

}  // namespace supdict
