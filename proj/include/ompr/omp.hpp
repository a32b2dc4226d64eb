#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "ompr/errors.hpp"

namespace ompr {

// One realized draw of the model  response = x * beta + noise.  The response
// is computed once at construction and never re-derived afterwards.
struct RegressionInstance {
  Eigen::MatrixXd x;         // n x p, column-major
  Eigen::VectorXd beta;      // p
  Eigen::VectorXd noise;     // n
  Eigen::VectorXd response;  // n
  double sigma = 0.0;        // noise scale

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

// Builds the instance, accumulating x*beta over the nonzero coefficients only
// so that large sparse draws stay cheap.
inline RegressionInstance make_instance(Eigen::MatrixXd x, Eigen::VectorXd beta,
                                        Eigen::VectorXd noise, double sigma) {
  if (beta.size() != x.cols())
    throw dimension_mismatch_error("beta length does not match column count");
  if (noise.size() != x.rows())
    throw dimension_mismatch_error("noise length does not match row count");
  if (x.rows() < 1 || x.cols() < 1)
    throw dimension_mismatch_error("design matrix must be at least 1x1");
  RegressionInstance inst;
  inst.response = noise;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) inst.response.noalias() += beta[j] * x.col(j);
  }
  inst.x = std::move(x);
  inst.beta = std::move(beta);
  inst.noise = std::move(noise);
  inst.sigma = sigma;
  return inst;
}

enum class SelectionRule { ArgmaxSingle, HardThresholdAll };

enum class StopReason { ThresholdNotExceeded, MaxStepsReached, ResidualZero, GramSingular };

inline const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::ThresholdNotExceeded: return "threshold_not_exceeded";
    case StopReason::MaxStepsReached: return "max_steps_reached";
    case StopReason::ResidualZero: return "residual_zero";
    case StopReason::GramSingular: return "gram_singular";
  }
  return "unknown";
}

struct OmpConfig {
  double threshold = 0.0;  // tau (or tau1)
  int max_steps = 0;       // 0 -> min(n, p)
  SelectionRule selection_rule = SelectionRule::ArgmaxSingle;
  // Schur-pivot floor, relative to the leading Gram pivot.
  double singular_tolerance = 1e-10;
};

// A residual with norm below this fraction of ||response|| is treated as zero
// (the normalized statistic is undefined there).
inline constexpr double kZeroResidualRtol = 1e-13;

struct StepRecord {
  int step_index = 0;              // 1-based
  std::vector<int> candidates;     // J_i, ascending column indices
  Eigen::VectorXd statistics;      // Z_{ij}, aligned with candidates
  std::vector<int> selected;       // a(i): columns brought into the fit
  double residual_norm_before = 0; // ||R_{i-1}||
  double max_statistic = 0;        // max_j |Z_{ij}|
};

struct OmpTrace {
  std::vector<StepRecord> steps;
  std::vector<int> detected;       // d(m), in detection order
  StopReason stop_reason = StopReason::ThresholdNotExceeded;
  Eigen::VectorXd beta_hat;        // least squares on detected, zero elsewhere
  Eigen::VectorXd residual_final;
};

// Z_j = X_j . residual / ||residual|| for each candidate column.
inline Eigen::VectorXd compute_statistics(const RegressionInstance& inst,
                                          const Eigen::VectorXd& residual,
                                          std::span<const int> candidates) {
  if (residual.size() != inst.n())
    throw dimension_mismatch_error("residual length does not match row count");
  const double norm = residual.norm();
  if (norm == 0.0) throw zero_residual_error();
  Eigen::VectorXd out(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = inst.x.col(candidates[i]).dot(residual) / norm;
  }
  return out;
}

// Positions (into the statistics vector) picked by the configured rule.
// ArgmaxSingle: empty when max|Z| <= threshold, otherwise the argmax with
// ties broken toward the lowest index. HardThresholdAll: every |Z_j| > tau.
inline std::vector<int> select_indices(const Eigen::VectorXd& statistics, double threshold,
                                       SelectionRule rule) {
  if (statistics.size() == 0)
    throw dimension_mismatch_error("select_indices requires a nonempty statistics vector");
  std::vector<int> picks;
  if (rule == SelectionRule::ArgmaxSingle) {
    int best = 0;
    double best_abs = std::fabs(statistics[0]);
    for (Eigen::Index j = 1; j < statistics.size(); ++j) {
      const double a = std::fabs(statistics[j]);
      if (a > best_abs) {
        best_abs = a;
        best = static_cast<int>(j);
      }
    }
    if (best_abs > threshold) picks.push_back(best);
  } else {
    for (Eigen::Index j = 0; j < statistics.size(); ++j) {
      if (std::fabs(statistics[j]) > threshold) picks.push_back(static_cast<int>(j));
    }
  }
  return picks;
}

// Growing Cholesky factor of the selected-columns Gram matrix. Each accepted
// column appends one row to L at O(n*m + m^2) cost, so a full run costs
// O(steps * n * k) instead of re-solving from scratch every step.
class IncrementalGramChol {
 public:
  IncrementalGramChol(const Eigen::MatrixXd& x, double singular_tolerance, int capacity)
      : x_(&x),
        rtol_(singular_tolerance),
        l_(Eigen::MatrixXd::Zero(capacity, capacity)),
        xty_(Eigen::VectorXd::Zero(capacity)) {}

  // Attempts to extend the factorization by column j; returns false when the
  // Schur-complement pivot falls below the relative floor (collinearity).
  bool try_add(int j, const Eigen::VectorXd& response) {
    const int m = static_cast<int>(cols_.size());
    const double gjj = x_->col(j).squaredNorm();
    double pivot_sq = gjj;
    if (m == 0) {
      if (!(gjj > 0.0)) return false;
      lead_pivot_ = gjj;
    } else {
      Eigen::VectorXd g(m);
      for (int i = 0; i < m; ++i) g[i] = x_->col(cols_[i]).dot(x_->col(j));
      Eigen::VectorXd w =
          l_.topLeftCorner(m, m).triangularView<Eigen::Lower>().solve(g);
      pivot_sq = gjj - w.squaredNorm();
      if (!(pivot_sq > rtol_ * lead_pivot_)) return false;
      l_.row(m).head(m) = w.transpose();
    }
    l_(m, m) = std::sqrt(pivot_sq);
    xty_[m] = x_->col(j).dot(response);
    cols_.push_back(j);
    return true;
  }

  // Least squares coefficients of the response on the added columns.
  Eigen::VectorXd solve() const {
    const int m = static_cast<int>(cols_.size());
    Eigen::VectorXd b = l_.topLeftCorner(m, m)
                            .triangularView<Eigen::Lower>()
                            .solve(xty_.head(m));
    l_.topLeftCorner(m, m)
        .triangularView<Eigen::Lower>()
        .transpose()
        .solveInPlace(b);
    return b;
  }

  const std::vector<int>& columns() const { return cols_; }
  int size() const { return static_cast<int>(cols_.size()); }

 private:
  const Eigen::MatrixXd* x_;
  double rtol_;
  double lead_pivot_ = 0.0;
  Eigen::MatrixXd l_;
  Eigen::VectorXd xty_;
  std::vector<int> cols_;
};

// Adds new_indices to the running fit and returns the refreshed residual
// Y - P Y, with P the projection onto the selected columns (state.columns()).
inline Eigen::VectorXd update_fit(const RegressionInstance& inst, IncrementalGramChol& state,
                                  std::span<const int> new_indices) {
  for (int j : new_indices) {
    if (j < 0 || j >= inst.p())
      throw dimension_mismatch_error("column index out of range");
    if (!state.try_add(j, inst.response))
      throw gram_singular_error("Schur pivot below tolerance for column " + std::to_string(j));
  }
  Eigen::VectorXd residual = inst.response;
  if (state.size() > 0) {
    const Eigen::VectorXd b = state.solve();
    const auto& cols = state.columns();
    for (int i = 0; i < state.size(); ++i) residual.noalias() -= b[i] * inst.x.col(cols[i]);
  }
  return residual;
}

// Least squares of the response on the given support, embedded into a
// p-vector with zeros off the support.
inline Eigen::VectorXd least_squares_on_support(const RegressionInstance& inst,
                                                std::span<const int> support,
                                                double singular_tolerance = 1e-10) {
  Eigen::VectorXd beta_hat = Eigen::VectorXd::Zero(inst.p());
  if (support.empty()) return beta_hat;
  IncrementalGramChol state(inst.x, singular_tolerance, static_cast<int>(support.size()));
  for (int j : support) {
    if (j < 0 || j >= inst.p())
      throw dimension_mismatch_error("support index out of range");
    if (!state.try_add(j, inst.response))
      throw gram_singular_error("support columns collinear at column " + std::to_string(j));
  }
  const Eigen::VectorXd b = state.solve();
  const auto& cols = state.columns();
  for (std::size_t i = 0; i < cols.size(); ++i) beta_hat[cols[i]] = b[i];
  return beta_hat;
}

// Runs OMP with the normalized-residual stopping rule: iterate
// statistics -> selection -> projection update until max|Z| <= threshold,
// the residual vanishes, the step cap is hit, or a Gram pivot collapses.
inline OmpTrace run_omp(const RegressionInstance& inst, const OmpConfig& cfg) {
  const Eigen::Index n = inst.n();
  const Eigen::Index p = inst.p();
  if (inst.response.size() != n || inst.beta.size() != p)
    throw dimension_mismatch_error("instance fields are inconsistent");
  if (!(cfg.threshold > 0.0)) throw dimension_mismatch_error("threshold must be positive");
  const int cap = static_cast<int>(std::min(n, p));
  const int max_steps = cfg.max_steps == 0 ? cap : cfg.max_steps;
  if (max_steps < 1 || max_steps > cap)
    throw dimension_mismatch_error("max_steps must lie in [1, min(n, p)]");

  OmpTrace trace;
  IncrementalGramChol state(inst.x, cfg.singular_tolerance, cap);
  std::vector<char> taken(static_cast<std::size_t>(p), 0);
  Eigen::VectorXd residual = inst.response;
  Eigen::VectorXd full_stats(p);
  const double response_norm = inst.response.norm();

  for (int step = 1;; ++step) {
    const double rnorm = residual.norm();
    if (rnorm <= kZeroResidualRtol * response_norm) {
      trace.stop_reason = StopReason::ResidualZero;
      break;
    }
    if (step > max_steps) {
      trace.stop_reason = StopReason::MaxStepsReached;
      break;
    }

    // One pass over the whole matrix; detected columns score ~0 and are
    // dropped from the candidate view below.
    full_stats.noalias() = inst.x.transpose() * residual;
    full_stats /= rnorm;

    StepRecord rec;
    rec.step_index = step;
    rec.residual_norm_before = rnorm;
    rec.candidates.reserve(static_cast<std::size_t>(p) - trace.detected.size());
    for (int j = 0; j < static_cast<int>(p); ++j) {
      if (!taken[static_cast<std::size_t>(j)]) rec.candidates.push_back(j);
    }
    rec.statistics.resize(static_cast<Eigen::Index>(rec.candidates.size()));
    for (std::size_t i = 0; i < rec.candidates.size(); ++i)
      rec.statistics[static_cast<Eigen::Index>(i)] = full_stats[rec.candidates[i]];
    rec.max_statistic = rec.statistics.size() ? rec.statistics.cwiseAbs().maxCoeff() : 0.0;

    const std::vector<int> picks =
        select_indices(rec.statistics, cfg.threshold, cfg.selection_rule);
    rec.selected.reserve(picks.size());
    for (int pos : picks) rec.selected.push_back(rec.candidates[static_cast<std::size_t>(pos)]);
    trace.steps.push_back(std::move(rec));

    if (trace.steps.back().selected.empty()) {
      trace.stop_reason = StopReason::ThresholdNotExceeded;
      break;
    }

    bool singular = false;
    std::vector<int> added;
    for (int j : trace.steps.back().selected) {
      if (!state.try_add(j, inst.response)) {
        singular = true;
        break;
      }
      added.push_back(j);
      trace.detected.push_back(j);
      taken[static_cast<std::size_t>(j)] = 1;
    }
    if (singular) trace.steps.back().selected = added;

    residual = inst.response;
    if (state.size() > 0) {
      const Eigen::VectorXd b = state.solve();
      const auto& cols = state.columns();
      for (int i = 0; i < state.size(); ++i) residual.noalias() -= b[i] * inst.x.col(cols[i]);
    }

    if (singular) {
      trace.stop_reason = StopReason::GramSingular;
      break;
    }
  }

  trace.beta_hat = Eigen::VectorXd::Zero(p);
  if (state.size() > 0) {
    const Eigen::VectorXd b = state.solve();
    const auto& cols = state.columns();
    for (int i = 0; i < state.size(); ++i) trace.beta_hat[cols[i]] = b[i];
  }
  trace.residual_final = std::move(residual);
  return trace;
}

}  // namespace ompr
