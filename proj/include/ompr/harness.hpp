#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "ompr/designs.hpp"
#include "ompr/errors.hpp"
#include "ompr/omp.hpp"
#include "ompr/rng.hpp"
#include "ompr/theory.hpp"

namespace ompr {

enum class NRule { Explicit, FromTheorem, FromCorollary };

struct ExperimentConfig {
  Regime regime = Regime::SubGaussian;
  DesignSpec design;  // design.n is the sample size under NRule::Explicit
  CoefficientSpec coefficients;
  NoiseKind noise_kind = NoiseKind::Gaussian;
  SubGaussianRegimeParams subgaussian;
  GaussianRegimeParams gaussian;
  long long trials = 1;
  std::uint64_t master_seed = 0;
  NRule n_rule = NRule::Explicit;
  bool record_traces = false;
  int workers = 0;  // 0 -> hardware concurrency
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  std::vector<int> s_hat;   // detected support, ascending
  std::vector<int> s_true;  // generator's large set S, ascending
  bool subset_ok = false;
  bool partial_ok = false;
  bool exact_ok = false;
  bool large_recovered = false;
  double l2_error_sq = 0.0;
  double oracle_bound_value = 0.0;
  int steps = 0;
  StopReason stop_reason = StopReason::ThresholdNotExceeded;
  std::optional<OmpTrace> trace;
};

struct ExperimentReport {
  // Config echo.
  Regime regime = Regime::SubGaussian;
  long long n = 0, p = 0, k = 0, trials = 0;
  std::uint64_t master_seed = 0;
  TheoryConstants theory;
  // Failure rates per metric (fractions of trials).
  double rate_not_subset = 0.0;
  double rate_not_partial = 0.0;
  double rate_not_exact = 0.0;
  double rate_not_large = 0.0;
  // Fraction of trials violating the theorem event {S_hat subset of S and
  // the undetected signal energy below alpha per component}.
  double empirical_failure_rate = 0.0;
  double theoretical_bound_raw = 0.0;
  double theoretical_bound = 0.0;  // clamped
  long long oracle_violations = 0;             // over all trials
  long long oracle_violations_subset_ok = 0;   // over trials with S_hat in S
  long long gram_singular_trials = 0;
  double wall_time_seconds = 0.0;  // informational only, never serialized
  std::vector<TrialOutcome> outcomes;
};

// Resolved sample size for the configured rule.
inline long long resolve_n(const ExperimentConfig& cfg) {
  switch (cfg.n_rule) {
    case NRule::Explicit:
      if (cfg.design.n < 1) throw dimension_mismatch_error("explicit n must be positive");
      return cfg.design.n;
    case NRule::FromTheorem:
      if (cfg.regime == Regime::SubGaussian)
        return subgaussian_constants(cfg.subgaussian).n_sufficient;
      return theorem_n_gaussian(cfg.gaussian);
    case NRule::FromCorollary:
      if (cfg.regime == Regime::SubGaussian) return corollary_n_subgaussian(cfg.subgaussian);
      return corollary_n_gaussian(cfg.gaussian);
  }
  throw dimension_mismatch_error("unknown n rule");
}

// Theory constants evaluated at the resolved n (mu_n and, in the Gaussian
// regime, the h-dependent lambdas all use it).
inline TheoryConstants resolve_constants(const ExperimentConfig& cfg, long long n) {
  const auto k = static_cast<long long>(cfg.coefficients.k);
  if (cfg.regime == Regime::SubGaussian) {
    return subgaussian_constants(cfg.subgaussian, static_cast<double>(n), k);
  }
  GaussianRegimeParams params = cfg.gaussian;
  params.n = static_cast<double>(n);
  return gaussian_constants(params, k);
}

namespace detail {

// Per-worker buffers, reused across trials so the big design matrix is
// allocated (and page-faulted) once.
struct TrialScratch {
  Eigen::MatrixXd x;
};

inline TrialOutcome run_trial_impl(const ExperimentConfig& cfg, long long n,
                                   const TheoryConstants& constants, long long trial_index,
                                   TrialScratch& scratch) {
  TrialOutcome out;
  out.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(trial_index));
  const std::uint64_t coeff_seed = derive_seed(out.seed, 1);
  const std::uint64_t design_seed = derive_seed(out.seed, 2);
  const std::uint64_t noise_seed = derive_seed(out.seed, 3);

  const Eigen::Index p = cfg.design.p;
  const double sigma = cfg.regime == Regime::SubGaussian ? cfg.subgaussian.sigma
                                                         : cfg.gaussian.sigma;

  CoefficientDraw coeff = sample_coefficients(cfg.coefficients, p, n, sigma, coeff_seed);
  out.s_true = coeff.s_set;

  DesignSpec design = cfg.design;
  design.n = n;
  sample_design_into(design, design_seed, scratch.x);
  Eigen::VectorXd noise = sample_noise(n, sigma, noise_seed, cfg.noise_kind);

  RegressionInstance inst;
  inst.response = noise;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (coeff.beta[j] != 0.0) inst.response.noalias() += coeff.beta[j] * scratch.x.col(j);
  }
  inst.x.swap(scratch.x);
  inst.beta = std::move(coeff.beta);
  inst.noise = std::move(noise);
  inst.sigma = sigma;

  OmpConfig omp_cfg;
  omp_cfg.threshold = cfg.regime == Regime::SubGaussian ? constants.tau : constants.tau1;
  OmpTrace trace = run_omp(inst, omp_cfg);
  inst.x.swap(scratch.x);  // hand the buffer back for the next trial

  out.s_hat = trace.detected;
  std::sort(out.s_hat.begin(), out.s_hat.end());
  out.steps = static_cast<int>(trace.steps.size());
  out.stop_reason = trace.stop_reason;

  const double cap = sigma * sigma * constants.mu_n * constants.mu_n;
  double oracle_sum = 0.0;
  for (Eigen::Index j = 0; j < p; ++j)
    oracle_sum += std::min(inst.beta[j] * inst.beta[j], cap);
  const double oracle_c = (4.0 / 9.0) * constants.r_recovery * constants.r_recovery;
  out.oracle_bound_value = oracle_c * oracle_sum;
  out.l2_error_sq = (trace.beta_hat - inst.beta).squaredNorm();

  if (trace.stop_reason == StopReason::GramSingular) {
    // Scored as a failure outright; never resampled.
    out.subset_ok = out.partial_ok = out.exact_ok = out.large_recovered = false;
  } else {
    out.subset_ok = std::includes(out.s_true.begin(), out.s_true.end(), out.s_hat.begin(),
                                  out.s_hat.end());
    out.exact_ok = out.s_hat == out.s_true;

    double missed_energy = 0.0;
    long long missed = 0;
    for (int j : out.s_true) {
      if (!std::binary_search(out.s_hat.begin(), out.s_hat.end(), j)) {
        missed_energy += inst.beta[j] * inst.beta[j];
        ++missed;
      }
    }
    out.partial_ok = missed == 0 || missed_energy <= constants.alpha * static_cast<double>(missed);

    const double large_cut = constants.r_recovery * sigma *
                             std::sqrt(static_cast<double>(out.s_true.size())) * constants.mu_n;
    out.large_recovered = true;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::fabs(inst.beta[j]) > large_cut &&
          !std::binary_search(out.s_hat.begin(), out.s_hat.end(), static_cast<int>(j))) {
        out.large_recovered = false;
        break;
      }
    }
  }

  if (cfg.record_traces) out.trace = std::move(trace);
  return out;
}

}  // namespace detail

// One seeded trial: sample (beta, X, eps), run OMP at the regime's threshold,
// score against the generator-known S. Deterministic in
// (master_seed, trial_index) regardless of execution order.
inline TrialOutcome run_trial(const ExperimentConfig& cfg, long long n,
                              const TheoryConstants& constants, long long trial_index) {
  detail::TrialScratch scratch;
  return detail::run_trial_impl(cfg, n, constants, trial_index, scratch);
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw dimension_mismatch_error("trials must be positive");
  const auto t0 = std::chrono::steady_clock::now();

  const long long n = resolve_n(cfg);
  const TheoryConstants constants = resolve_constants(cfg, n);

  ExperimentReport report;
  report.regime = cfg.regime;
  report.n = n;
  report.p = cfg.design.p;
  report.k = cfg.coefficients.k;
  report.trials = cfg.trials;
  report.master_seed = cfg.master_seed;
  report.theory = constants;
  report.outcomes.resize(static_cast<std::size_t>(cfg.trials));

  int workers = cfg.workers > 0 ? cfg.workers
                                : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = static_cast<int>(std::min<long long>(workers, cfg.trials));

  std::atomic<long long> next{0};
  auto worker = [&]() {
    detail::TrialScratch scratch;
    for (;;) {
      const long long i = next.fetch_add(1);
      if (i >= cfg.trials) break;
      report.outcomes[static_cast<std::size_t>(i)] =
          detail::run_trial_impl(cfg, n, constants, i, scratch);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Deterministic fold over the trial-indexed sequence.
  long long not_subset = 0, not_partial = 0, not_exact = 0, not_large = 0, not_event = 0;
  for (const TrialOutcome& o : report.outcomes) {
    not_subset += !o.subset_ok;
    not_partial += !o.partial_ok;
    not_exact += !o.exact_ok;
    not_large += !o.large_recovered;
    not_event += !(o.subset_ok && o.partial_ok);
    report.oracle_violations += o.l2_error_sq > o.oracle_bound_value;
    if (o.subset_ok) report.oracle_violations_subset_ok += o.l2_error_sq > o.oracle_bound_value;
    report.gram_singular_trials += o.stop_reason == StopReason::GramSingular;
  }
  const auto rate = [&](long long count) {
    return static_cast<double>(count) / static_cast<double>(cfg.trials);
  };
  report.rate_not_subset = rate(not_subset);
  report.rate_not_partial = rate(not_partial);
  report.rate_not_exact = rate(not_exact);
  report.rate_not_large = rate(not_large);
  report.empirical_failure_rate = rate(not_event);
  report.theoretical_bound_raw = constants.perr_bound_raw;
  report.theoretical_bound = constants.perr_bound;

  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------
// Desk-scale oracles
// ---------------------------------------------------------------------------

struct BestSubset {
  std::vector<int> support;  // ascending
  double rss = 0.0;
};

// Exhaustive residual-sum-of-squares minimization over all supports of size
// at most max_k. Subsets are visited by increasing size, lexicographically
// within a size, and a candidate replaces the incumbent only when strictly
// better beyond a response-scaled tolerance; near-ties therefore resolve to
// the smallest support, lowest indices first.
inline BestSubset brute_force_best_subset(const RegressionInstance& inst, int max_k) {
  if (inst.p() > 24 || max_k > 6)
    throw too_large_error("brute force limited to p <= 24 and max_k <= 6");
  if (max_k < 0) throw dimension_mismatch_error("max_k must be nonnegative");

  const double scale = inst.response.squaredNorm();
  BestSubset best;
  best.rss = scale;  // empty support
  const double tol = 1e-12 * (scale + 1.0);
  const int p = static_cast<int>(inst.p());

  Eigen::MatrixXd cols(inst.n(), std::max(max_k, 1));
  for (int size = 1; size <= std::min(max_k, p); ++size) {
    std::vector<int> subset(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) subset[static_cast<std::size_t>(i)] = i;
    for (;;) {
      for (int i = 0; i < size; ++i) cols.col(i) = inst.x.col(subset[static_cast<std::size_t>(i)]);
      const Eigen::VectorXd coef =
          cols.leftCols(size).colPivHouseholderQr().solve(inst.response);
      const double rss = (inst.response - cols.leftCols(size) * coef).squaredNorm();
      if (rss < best.rss - tol) {
        best.rss = rss;
        best.support = subset;
      }
      // Advance to the next lexicographic size-combination.
      int i = size - 1;
      while (i >= 0 && subset[static_cast<std::size_t>(i)] == p - size + i) --i;
      if (i < 0) break;
      ++subset[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < size; ++j)
        subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return best;
}

struct TailBoundReport {
  long long trials = 0;
  long long p = 0, n = 0;
  double a = 0.0;
  double rho_threshold = 0.0;   // sqrt(2 (1 + a) log p)
  double mu = 0.0;              // mu_n
  double max_rate = 0.0;        // empirical P(max_j |W_j| > rho), W in R^p
  double max_bound = 0.0;       // 2 p / p^{1+a}
  double chi_rate = 0.0;        // empirical P(||W|| / sqrt(n) >= 1 + mu_n)
  double chi_bound = 0.0;       // 1 / p
};

// Empirical check of the two tail inequalities the analysis leans on: the
// maximum of p standard normals against sqrt(2(1+a) log p), and the chi
// norm against sqrt(n) (1 + mu_n).
inline TailBoundReport check_tail_bounds(long long trials, Eigen::Index n, Eigen::Index p,
                                         double a, std::uint64_t seed) {
  if (trials < 1 || n < 1 || p < 2)
    throw dimension_mismatch_error("check_tail_bounds requires trials >= 1, n >= 1, p >= 2");
  TailBoundReport rep;
  rep.trials = trials;
  rep.p = p;
  rep.n = n;
  rep.a = a;
  rep.rho_threshold = tau(static_cast<double>(p), a);
  rep.mu = mu_n(static_cast<double>(p), static_cast<double>(n));
  rep.max_bound = 2.0 * static_cast<double>(p) / std::pow(static_cast<double>(p), 1.0 + a);
  rep.chi_bound = 1.0 / static_cast<double>(p);

  long long max_exceed = 0, chi_exceed = 0;
  NormalSampler normal(seed);
  const double chi_cut =
      std::sqrt(static_cast<double>(n)) * (1.0 + rep.mu);
  for (long long t = 0; t < trials; ++t) {
    double max_abs = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) max_abs = std::max(max_abs, std::fabs(normal()));
    max_exceed += max_abs > rep.rho_threshold;
    double sq = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = normal();
      sq += w * w;
    }
    chi_exceed += std::sqrt(sq) >= chi_cut;
  }
  rep.max_rate = static_cast<double>(max_exceed) / static_cast<double>(trials);
  rep.chi_rate = static_cast<double>(chi_exceed) / static_cast<double>(trials);
  return rep;
}

}  // namespace ompr
