#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ompr/errors.hpp"
#include "ompr/rng.hpp"

namespace ompr {

// ---------------------------------------------------------------------------
// Design matrices
// ---------------------------------------------------------------------------

enum class Ensemble { IidGaussian, IidRademacher, CorrelatedGaussian };

// Recipe for the population correlation matrix of a correlated Gaussian
// design. ConstantOffDiagonal builds Sigma_ii = 1, Sigma_ij = c / kbar.
struct SigmaSpec {
  enum class Kind { Identity, ConstantOffDiagonal, Explicit };
  Kind kind = Kind::Identity;
  double c = 0.0;
  int kbar = 1;
  Eigen::MatrixXd matrix;  // Explicit only

  static SigmaSpec identity() { return {}; }
  static SigmaSpec constant_off_diagonal(double c, int kbar) {
    SigmaSpec s;
    s.kind = Kind::ConstantOffDiagonal;
    s.c = c;
    s.kbar = kbar;
    return s;
  }
  static SigmaSpec explicit_matrix(Eigen::MatrixXd m) {
    SigmaSpec s;
    s.kind = Kind::Explicit;
    s.matrix = std::move(m);
    return s;
  }
};

struct DesignSpec {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Ensemble ensemble = Ensemble::IidGaussian;
  SigmaSpec sigma;  // CorrelatedGaussian only
};

// Dense Sigma for the given spec, validated: symmetric, unit diagonal
// (tolerance 1e-9) and positive definite.
inline Eigen::MatrixXd build_sigma(const SigmaSpec& spec, Eigen::Index p) {
  Eigen::MatrixXd sigma;
  switch (spec.kind) {
    case SigmaSpec::Kind::Identity:
      return Eigen::MatrixXd::Identity(p, p);
    case SigmaSpec::Kind::ConstantOffDiagonal: {
      if (spec.kbar < 1) throw sigma_not_pd_error("kbar must be positive");
      const double gamma = spec.c / static_cast<double>(spec.kbar);
      if (!(std::fabs(gamma) < 1.0))
        throw sigma_not_pd_error("|c / kbar| must be below 1");
      if (p > 1 && !(1.0 + (static_cast<double>(p) - 1.0) * gamma > 0.0))
        throw sigma_not_pd_error("constant off-diagonal matrix is not positive definite");
      sigma = Eigen::MatrixXd::Constant(p, p, gamma);
      sigma.diagonal().setOnes();
      return sigma;
    }
    case SigmaSpec::Kind::Explicit: {
      sigma = spec.matrix;
      if (sigma.rows() != p || sigma.cols() != p)
        throw sigma_not_pd_error("explicit matrix has the wrong dimensions");
      if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw sigma_not_pd_error("explicit matrix is not symmetric");
      if ((sigma.diagonal().array() - 1.0).abs().maxCoeff() > 1e-9)
        throw sigma_not_pd_error("explicit matrix must have a unit diagonal");
      Eigen::LLT<Eigen::MatrixXd> llt(sigma);
      if (llt.info() != Eigen::Success)
        throw sigma_not_pd_error("explicit matrix is not positive definite");
      return sigma;
    }
  }
  throw sigma_not_pd_error("unknown sigma kind");
}

// Max absolute off-diagonal entry, gamma(Sigma).
inline double coherence_sigma(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols())
    throw dimension_mismatch_error("coherence_sigma requires a square matrix");
  double best = 0.0;
  for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
      if (i != j) best = std::max(best, std::fabs(sigma(i, j)));
    }
  }
  return best;
}

namespace detail {

// Cholesky factor of (1-gamma) I + gamma 1 1^T has constant sub-diagonal
// entries within each column: L(i,j) = sub[j] for i > j, L(j,j) = diag[j].
// This lets L z be applied in O(p) per row instead of O(p^2).
struct ConstOffDiagChol {
  Eigen::VectorXd diag, sub;
};

inline ConstOffDiagChol const_off_diag_cholesky(double gamma, Eigen::Index p) {
  if (!(std::fabs(gamma) < 1.0))
    throw sigma_not_pd_error("|c / kbar| must be below 1");
  ConstOffDiagChol f;
  f.diag.resize(p);
  f.sub.resize(p);
  const double c = 1.0 - gamma;  // common diagonal of every Schur complement
  double d = gamma;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double pivot_sq = c + d;
    if (!(pivot_sq > 0.0))
      throw sigma_not_pd_error("constant off-diagonal matrix is not positive definite");
    f.diag[j] = std::sqrt(pivot_sq);
    f.sub[j] = d / f.diag[j];
    d = d * c / pivot_sq;
  }
  return f;
}

}  // namespace detail

// Samples the design into a preallocated matrix (resized as needed); the
// normal stream is consumed column by column, so CorrelatedGaussian with an
// identity Sigma reproduces IidGaussian entrywise at equal seeds.
inline void sample_design_into(const DesignSpec& spec, std::uint64_t seed,
                               Eigen::MatrixXd& out) {
  if (spec.n < 1 || spec.p < 1)
    throw dimension_mismatch_error("design dimensions must be positive");
  const Eigen::Index n = spec.n;
  const Eigen::Index p = spec.p;
  out.resize(n, p);
  switch (spec.ensemble) {
    case Ensemble::IidGaussian: {
      NormalSampler normal(seed);
      double* data = out.data();
      const Eigen::Index total = n * p;
      for (Eigen::Index i = 0; i < total; ++i) data[i] = normal();
      return;
    }
    case Ensemble::IidRademacher: {
      Xoshiro256pp engine(seed);
      double* data = out.data();
      const Eigen::Index total = n * p;
      for (Eigen::Index i = 0; i < total; ++i) data[i] = engine.next_sign();
      return;
    }
    case Ensemble::CorrelatedGaussian:
      break;
  }

  NormalSampler normal(seed);
  if (spec.sigma.kind == SigmaSpec::Kind::Identity) {
    double* data = out.data();
    const Eigen::Index total = n * p;
    for (Eigen::Index i = 0; i < total; ++i) data[i] = normal();
    return;
  }
  if (spec.sigma.kind == SigmaSpec::Kind::ConstantOffDiagonal) {
    if (spec.sigma.kbar < 1) throw sigma_not_pd_error("kbar must be positive");
    const double gamma = spec.sigma.c / static_cast<double>(spec.sigma.kbar);
    if (p > 1 && !(1.0 + (static_cast<double>(p) - 1.0) * gamma > 0.0))
      throw sigma_not_pd_error("constant off-diagonal matrix is not positive definite");
    const detail::ConstOffDiagChol f = detail::const_off_diag_cholesky(gamma, p);
    // Row l of X is L z_l; with column-constant L this is
    // X(l, j) = diag[j] z(l, j) + sum_{i<j} sub[i] z(l, i), a running prefix.
    Eigen::VectorXd z(n);
    Eigen::VectorXd prefix = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index l = 0; l < n; ++l) z[l] = normal();
      out.col(j) = f.diag[j] * z + prefix;
      if (j + 1 < p) prefix.noalias() += f.sub[j] * z;
    }
    return;
  }

  // Explicit Sigma: dense factor, X = Z L^T.
  const Eigen::MatrixXd sigma = build_sigma(spec.sigma, p);
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  Eigen::MatrixXd z(n, p);
  {
    double* data = z.data();
    const Eigen::Index total = n * p;
    for (Eigen::Index i = 0; i < total; ++i) data[i] = normal();
  }
  out.noalias() = z * l.transpose().triangularView<Eigen::Upper>();
}

inline Eigen::MatrixXd sample_design(const DesignSpec& spec, std::uint64_t seed) {
  Eigen::MatrixXd out;
  sample_design_into(spec, seed, out);
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient vectors
// ---------------------------------------------------------------------------

enum class SignRule { Random, AllPositive };
enum class SupportRule { UniformRandom, FirstK };
enum class Magnitudes { AllEqual, UniformAboveMin };

struct CoefficientSpec {
  enum class Kind { ExactSparse, Compressible };
  Kind kind = Kind::ExactSparse;
  int k = 0;
  double beta_min = 1.0;
  Magnitudes magnitudes = Magnitudes::AllEqual;  // ExactSparse only
  double eta = 0.0;                              // Compressible: l1 tail budget / (sigma mu_n)
  double nu = 0.0;                               // Compressible: per-entry cap / (sigma mu_n)
  SignRule sign_rule = SignRule::Random;
  SupportRule support_rule = SupportRule::UniformRandom;

  static CoefficientSpec exact_sparse(int k, double beta_min,
                                      Magnitudes mags = Magnitudes::AllEqual,
                                      SignRule sign = SignRule::Random,
                                      SupportRule support = SupportRule::UniformRandom) {
    CoefficientSpec s;
    s.kind = Kind::ExactSparse;
    s.k = k;
    s.beta_min = beta_min;
    s.magnitudes = mags;
    s.sign_rule = sign;
    s.support_rule = support;
    return s;
  }
  static CoefficientSpec compressible(int k, double beta_min, double eta, double nu,
                                      SignRule sign = SignRule::Random,
                                      SupportRule support = SupportRule::UniformRandom) {
    CoefficientSpec s;
    s.kind = Kind::Compressible;
    s.k = k;
    s.beta_min = beta_min;
    s.eta = eta;
    s.nu = nu;
    s.sign_rule = sign;
    s.support_rule = support;
    return s;
  }
};

struct CoefficientDraw {
  Eigen::VectorXd beta;     // p
  std::vector<int> s_set;   // the large set S, ascending
};

// Tail entries sit this fraction below the cutoff sigma*nu*mu_n so that S
// membership is never decided within rounding distance of the boundary.
inline constexpr double kTailBoundaryMargin = 1e-4;

inline CoefficientDraw sample_coefficients(const CoefficientSpec& spec, Eigen::Index p,
                                           Eigen::Index n, double sigma,
                                           std::uint64_t seed) {
  if (spec.k < 0 || spec.k > p)
    throw dimension_mismatch_error("k must lie in [0, p]");
  if (!(spec.beta_min > 0.0)) throw dimension_mismatch_error("beta_min must be positive");

  Xoshiro256pp engine(seed);
  CoefficientDraw draw;
  draw.beta = Eigen::VectorXd::Zero(p);

  // Support of the large set.
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  if (spec.support_rule == SupportRule::UniformRandom) {
    for (int i = 0; i < spec.k; ++i) {
      const auto j = i + static_cast<int>(engine.next_below(
                             static_cast<std::uint64_t>(p - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
  }
  draw.s_set.assign(order.begin(), order.begin() + spec.k);
  std::sort(draw.s_set.begin(), draw.s_set.end());

  const auto sign = [&]() { return spec.sign_rule == SignRule::AllPositive ? 1.0 : engine.next_sign(); };

  if (spec.kind == CoefficientSpec::Kind::ExactSparse) {
    for (int j : draw.s_set) {
      double mag = spec.beta_min;
      if (spec.magnitudes == Magnitudes::UniformAboveMin)
        mag *= 1.0 + engine.next_open01();  // uniform on (beta_min, 2 beta_min)
      draw.beta[j] = sign() * mag;
    }
    return draw;
  }

  // Compressible: the large entries sit at beta_min (above the cutoff) and
  // the tail spreads the l1 budget sigma*eta*mu_n over entries of S^c, each
  // capped just below sigma*nu*mu_n.
  if (spec.eta < 0.0 || spec.nu < 0.0)
    throw dimension_mismatch_error("eta and nu must be nonnegative");
  if (n < 1 || p < 2) throw dimension_mismatch_error("compressible draws need n >= 1, p >= 2");
  const double mu = std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(n));
  const double cutoff = sigma * spec.nu * mu;
  const double budget = sigma * spec.eta * mu;

  if (spec.k > 0 && !(spec.beta_min > cutoff * (1.0 + kTailBoundaryMargin)))
    throw infeasible_tail_error("beta_min does not clear the S cutoff sigma*nu*mu_n");
  for (int j : draw.s_set) draw.beta[j] = sign() * spec.beta_min;

  if (budget > 0.0) {
    if (cutoff == 0.0)
      throw infeasible_tail_error("positive l1 budget with a zero per-entry cap");
    const double cap = cutoff * (1.0 - kTailBoundaryMargin);
    const auto full = static_cast<long long>(std::floor(budget / cap));
    const double remainder = budget - static_cast<double>(full) * cap;
    const long long entries = full + (remainder > 0.0 ? 1 : 0);
    if (entries > p - spec.k)
      throw infeasible_tail_error("l1 budget does not fit under the per-entry cap on S^c");
    // Tail positions: a uniform draw from S^c (the first `entries` slots of
    // the shuffled complement), or the first free indices under FirstK.
    std::vector<int> complement(order.begin() + spec.k, order.end());
    std::sort(complement.begin(), complement.end());
    if (spec.support_rule == SupportRule::UniformRandom) {
      for (long long i = 0; i < entries; ++i) {
        const auto j = i + static_cast<long long>(engine.next_below(
                               static_cast<std::uint64_t>(complement.size() - i)));
        std::swap(complement[static_cast<std::size_t>(i)], complement[static_cast<std::size_t>(j)]);
      }
    }
    for (long long i = 0; i < entries; ++i) {
      const double mag = i < full ? cap : remainder;
      draw.beta[complement[static_cast<std::size_t>(i)]] = sign() * mag;
    }
  }
  return draw;
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

enum class NoiseKind { Gaussian, Rademacher };

inline Eigen::VectorXd sample_noise(Eigen::Index n, double sigma, std::uint64_t seed,
                                    NoiseKind kind = NoiseKind::Gaussian) {
  if (sigma < 0.0) throw dimension_mismatch_error("sigma must be nonnegative");
  Eigen::VectorXd out(n);
  if (kind == NoiseKind::Gaussian) {
    NormalSampler normal(seed);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = sigma * normal();
  } else {
    Xoshiro256pp engine(seed);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = sigma * engine.next_sign();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Condition verification
// ---------------------------------------------------------------------------

struct ConditionReport {
  std::optional<double> lambda_min_hat;  // min eig of X_S^T X_S / n
  std::optional<double> lambda_max_hat;
  std::optional<double> noise_energy;    // ||eps||^2 / (n sigma^2)
  double coherence_x = 0.0;              // gamma(X) on normalized columns
  std::optional<bool> condition1_ok;
  std::optional<bool> condition2_ok;
};

// Checks the design/noise conditions against the supplied population
// constants. Dense symmetric eigensolve; intended for desk-scale matrices.
inline ConditionReport verify_conditions(const Eigen::MatrixXd& x, std::span<const int> support,
                                         const Eigen::VectorXd* noise, double sigma,
                                         double lambda_min, double lambda_max, double lambda) {
  const auto n = static_cast<double>(x.rows());
  ConditionReport report;

  if (!support.empty()) {
    Eigen::MatrixXd xs(x.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) {
      const int j = support[i];
      if (j < 0 || j >= x.cols())
        throw dimension_mismatch_error("support index out of range");
      xs.col(static_cast<Eigen::Index>(i)) = x.col(j);
    }
    const Eigen::MatrixXd gram = xs.transpose() * xs / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    report.lambda_min_hat = eig.eigenvalues().minCoeff();
    report.lambda_max_hat = eig.eigenvalues().maxCoeff();
    report.condition1_ok =
        *report.lambda_min_hat >= lambda_min && *report.lambda_max_hat <= lambda_max;
  }

  if (noise != nullptr) {
    if (noise->size() != x.rows())
      throw dimension_mismatch_error("noise length does not match row count");
    if (!(sigma > 0.0)) throw dimension_mismatch_error("sigma must be positive for condition 2");
    report.noise_energy = noise->squaredNorm() / (n * sigma * sigma);
    report.condition2_ok = *report.noise_energy <= lambda;
  }

  // gamma(X) is reported on norm-equalized columns.
  const Eigen::VectorXd norms = x.colwise().norm();
  const Eigen::MatrixXd gram = x.transpose() * x;
  double coherence = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < x.cols(); ++i) {
      const double denom = norms[i] * norms[j];
      if (denom > 0.0) coherence = std::max(coherence, std::fabs(gram(i, j)) / denom);
    }
  }
  report.coherence_x = coherence;
  return report;
}

}  // namespace ompr
