#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "ompr/errors.hpp"

namespace ompr {

enum class Regime { SubGaussian, Gaussian };

inline const char* to_string(Regime regime) {
  return regime == Regime::SubGaussian ? "subgaussian" : "gaussian";
}

// ---------------------------------------------------------------------------
// Elementary quantities
// ---------------------------------------------------------------------------

// Noise-level scale mu_n = sqrt(2 log(p) / n).
inline double mu_n(double p, double n) {
  if (!(p >= 2.0) || !(n >= 1.0))
    throw dimension_mismatch_error("mu_n requires p >= 2 and n >= 1");
  return std::sqrt(2.0 * std::log(p) / n);
}

// Threshold tau = sqrt(2 (1 + a) log(p)).
inline double tau(double p, double a) {
  if (!(p >= 2.0) || !(a > 0.0))
    throw dimension_mismatch_error("tau requires p >= 2 and a > 0");
  return std::sqrt(2.0 * (1.0 + a) * std::log(p));
}

// Correlated-design threshold tau1 = rho * tau, rho >= 1.
inline double tau1(double tau_value, double rho) {
  if (!(rho >= 1.0)) throw dimension_mismatch_error("tau1 requires rho >= 1");
  return rho * tau_value;
}

// f(delta) = (1 - 1/sqrt(1 + delta))^{-2}.
inline double f_delta(double delta) {
  if (!(delta > 0.0)) throw std::domain_error("f_delta requires delta > 0");
  const double denom = 1.0 - 1.0 / std::sqrt(1.0 + delta);
  return 1.0 / (denom * denom);
}

struct R1R2 {
  double r1 = 0.0;
  double r2 = 0.0;
};

// r1 = max(lambda_max, lambda) / lambda_min^3,  r2 = 1/sqrt(lambda_min) + sqrt(r1).
inline R1R2 r1_r2_subgaussian(double lambda_min, double lambda_max, double lambda) {
  if (!(lambda_min > 0.0) || !(lambda_max > 0.0) || !(lambda > 0.0))
    throw dimension_mismatch_error("eigenvalue band constants must be positive");
  R1R2 out;
  out.r1 = std::max(lambda_max, lambda) / (lambda_min * lambda_min * lambda_min);
  out.r2 = 1.0 / std::sqrt(lambda_min) + std::sqrt(out.r1);
  return out;
}

// ---------------------------------------------------------------------------
// Correlated Gaussian regime
// ---------------------------------------------------------------------------

struct PopulationConstants {
  double s_min = 1.0, s_max = 1.0, omega = 0.0, nu1_tilde = 0.0, nu1 = 0.0, eta_bar = 0.0;
};

// Constants implied by the incoherence level omega0 and the tail budget
// (nu, eta): s_min = 1 - omega0/2, s_max = 1 + omega0/2, omega = omega0,
// nu1_tilde = omega0 * eta/kbar, nu1 = nu + omega0 * eta/kbar.
inline PopulationConstants derive_population_constants(double omega0, double nu, double eta,
                                                       double kbar) {
  if (!(omega0 >= 0.0 && omega0 < 1.0))
    throw dimension_mismatch_error("omega0 must lie in [0, 1)");
  if (!(kbar >= 1.0)) throw dimension_mismatch_error("kbar must be at least 1");
  if (nu < 0.0 || eta < 0.0) throw dimension_mismatch_error("nu and eta must be nonnegative");
  PopulationConstants c;
  c.eta_bar = eta / kbar;
  c.s_min = 1.0 - omega0 / 2.0;
  c.s_max = 1.0 + omega0 / 2.0;
  c.omega = omega0;
  c.nu1_tilde = omega0 * c.eta_bar;
  c.nu1 = nu + omega0 * c.eta_bar;
  return c;
}

struct GaussianLambdas {
  double h = 0.0, h_ell = 0.0, h_u = 0.0;
  double lambda_min = 0.0, lambda_max = 0.0, lambda = 0.0;
};

// lambda_min = s_min (1-h)^2, lambda_max = s_max (1+h)^2 with
// h = sqrt(kbar/n) + mu_n, and
// lambda = (1 + s_max^2 nu1_tilde^2 + nu1 eta_bar)(1 + kbar^{-1/2})^2.
inline GaussianLambdas gaussian_lambdas(const PopulationConstants& pc, double p, double n,
                                        double kbar) {
  GaussianLambdas out;
  out.h = std::sqrt(kbar / n) + mu_n(p, n);
  if (!(out.h < 1.0))
    throw h_not_less_than_one_error("h = sqrt(kbar/n) + mu_n = " + std::to_string(out.h) +
                                    "; increase n");
  out.h_ell = (1.0 - out.h) * (1.0 - out.h);
  out.h_u = (1.0 + out.h) * (1.0 + out.h);
  out.lambda_min = pc.s_min * out.h_ell;
  out.lambda_max = pc.s_max * out.h_u;
  const double root = 1.0 + 1.0 / std::sqrt(kbar);
  out.lambda =
      (1.0 + pc.s_max * pc.s_max * pc.nu1_tilde * pc.nu1_tilde + pc.nu1 * pc.eta_bar) * root * root;
  return out;
}

// r2 = (1 - omega)(nu1_tilde + sqrt((1 + nu1 eta_bar)/lambda_min)) + sqrt(r1).
inline double r2_gaussian(const PopulationConstants& pc, double lambda_min, double r1) {
  if (!(lambda_min > 0.0) || !(r1 > 0.0))
    throw dimension_mismatch_error("lambda_min and r1 must be positive");
  return (1.0 - pc.omega) * (pc.nu1_tilde + std::sqrt((1.0 + pc.nu1 * pc.eta_bar) / lambda_min)) +
         std::sqrt(r1);
}

// rho = (nu1 (1 + kbar^{-1/2}) + 1) / (1 - omega); always >= 1.
inline double rho(double nu1, double omega, double kbar) {
  if (!(omega >= 0.0 && omega < 1.0))
    throw dimension_mismatch_error("omega must lie in [0, 1)");
  if (!(kbar >= 1.0)) throw dimension_mismatch_error("kbar must be at least 1");
  if (nu1 < 0.0) throw dimension_mismatch_error("nu1 must be nonnegative");
  return (nu1 * (1.0 + 1.0 / std::sqrt(kbar)) + 1.0) / (1.0 - omega);
}

// k-sparse variant of r2 (evaluated at nu = 1, eta = kbar):
// r2* = (1 - omega0)(omega0 + sqrt((2 + omega0)/lambda_min)) + sqrt(r1).
inline double r2_star(double omega0, double lambda_min, double r1) {
  if (!(lambda_min > 0.0) || !(r1 > 0.0))
    throw dimension_mismatch_error("lambda_min and r1 must be positive");
  return (1.0 - omega0) * (omega0 + std::sqrt((2.0 + omega0) / lambda_min)) + std::sqrt(r1);
}

// ---------------------------------------------------------------------------
// Sample sizes, corollary constants and failure bounds
// ---------------------------------------------------------------------------

struct XiAndN {
  double xi = 0.0;
  long long n_sufficient = 0;
};

// xi = max{(1 + delta) r1, sigma^2 r2^2 f(delta) / (kbar alpha)} and the
// sufficient sample size ceil(xi * kbar * tau_eff^2).
inline XiAndN xi_and_n(double r1, double r2, double sigma, double kbar, double alpha,
                       double delta, double tau_eff) {
  if (!(alpha > 0.0) || !(delta > 0.0))
    throw dimension_mismatch_error("alpha and delta must be positive");
  XiAndN out;
  out.xi = std::max((1.0 + delta) * r1, sigma * sigma * r2 * r2 * f_delta(delta) / (kbar * alpha));
  out.n_sufficient = static_cast<long long>(std::ceil(out.xi * kbar * tau_eff * tau_eff));
  return out;
}

struct CorollaryConstants {
  double xi_bar = 0.0;      // 32 (r2 rho)^2 (1 + a)
  double r_recovery = 0.0;  // 2 r2 rho sqrt(1 + a)
};

inline CorollaryConstants corollary_constants(double r2, double rho_value, double a) {
  if (!(a > 0.0)) throw dimension_mismatch_error("a must be positive");
  if (!(rho_value >= 1.0)) throw dimension_mismatch_error("rho must be at least 1");
  CorollaryConstants out;
  const double r2rho = r2 * rho_value;
  out.xi_bar = 32.0 * r2rho * r2rho * (1.0 + a);
  out.r_recovery = 2.0 * r2rho * std::sqrt(1.0 + a);
  return out;
}

// Failure probability of the recovery event. Sub-Gaussian regime:
// P(k) = P(E_cond) + 2(k+1)/p^a + 2k/p^{1+a}  (P(0) = 2/p^a), with P(E_cond)
// supplied by the caller. Gaussian regime:
// P'(k) = 4/p + sqrt(2/pi)/tau [ (k+1)/p^a + k/p^{1+a} ]
// (P'(0) = 1/p + sqrt(2/pi)/(tau p^a)). Returned raw, possibly above 1.
inline double failure_bound(long long k, double p, double a, double tau_value, Regime regime,
                            double p_econd = 0.0) {
  if (k < 0) throw dimension_mismatch_error("k must be nonnegative");
  const double pa = std::pow(p, a);
  const double p1a = std::pow(p, 1.0 + a);
  if (regime == Regime::SubGaussian) {
    if (k == 0) return 2.0 / pa;
    return p_econd + 2.0 * static_cast<double>(k + 1) / pa + 2.0 * static_cast<double>(k) / p1a;
  }
  const double c = std::sqrt(2.0 / std::numbers::pi);
  if (k == 0) return 1.0 / p + c / (tau_value * pa);
  return 4.0 / p +
         (c / tau_value) *
             (static_cast<double>(k + 1) / pa + static_cast<double>(k) / p1a);
}

inline double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

// ---------------------------------------------------------------------------
// Oracle inequality
// ---------------------------------------------------------------------------

struct OracleBound {
  double c_constant = 0.0;  // C = (4/9) r^2, or C1 = (4/9) (r*)^2
  double r2_star = 0.0;     // filled for the k-sparse variant
};

// C * sum_j min(beta_j^2, sigma^2 mu_n^2).
inline double oracle_bound_value(const Eigen::VectorXd& beta, double sigma, double mu,
                                 double c_constant) {
  if (!(c_constant > 0.0)) throw dimension_mismatch_error("oracle constant must be positive");
  const double cap = sigma * sigma * mu * mu;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) sum += std::min(beta[j] * beta[j], cap);
  return c_constant * sum;
}

// ---------------------------------------------------------------------------
// Assembled regimes
// ---------------------------------------------------------------------------

struct SubGaussianRegimeParams {
  double p = 0.0;
  double kbar = 1.0;
  double a = 1.0;
  double sigma = 1.0;
  double lambda_min = 0.0, lambda_max = 0.0, lambda = 0.0;
  double delta = 3.0;
  std::optional<double> alpha;  // default sigma^2 / ((1 + delta) kbar)

  double effective_alpha() const {
    return alpha ? *alpha : sigma * sigma / ((1.0 + delta) * kbar);
  }
};

struct GaussianRegimeParams {
  double p = 0.0;
  double n = 0.0;  // anchor for h and mu_n
  double kbar = 1.0;
  double a = 1.0;
  double sigma = 1.0;
  double omega0 = 0.0, nu = 0.0, eta = 0.0;
  double delta = 3.0;
  std::optional<double> alpha;

  double effective_alpha() const {
    return alpha ? *alpha : sigma * sigma / ((1.0 + delta) * kbar);
  }
};

struct TheoryConstants {
  Regime regime = Regime::SubGaussian;
  double mu_n = 0.0;
  double tau = 0.0;
  double tau1 = 0.0;
  double rho = 1.0;
  double r1 = 0.0, r2 = 0.0;
  double f_delta = 0.0;
  double xi = 0.0;
  long long n_sufficient = 0;
  double xi_bar = 0.0;
  double r_recovery = 0.0;
  double perr_bound_raw = 0.0;  // P(k) / P'(k), unclamped
  double perr_bound = 0.0;      // clamped to [0, 1]
  long long bound_k = 0;
  double alpha = 0.0, delta = 0.0;  // effective values
  // Gaussian-regime derived constants (defaults describe the i.i.d. case).
  PopulationConstants population;
  GaussianLambdas lambdas;
};

namespace detail {

inline void check_r2_dominates_sqrt_r1(double r1, double r2) {
  if (r2 + 1e-12 < std::sqrt(r1))
    throw std::logic_error("internal invariant violated: r2 < sqrt(r1)");
}

}  // namespace detail

// Everything Theorem/Corollary 1 needs, at the supplied eigenvalue band.
// mu_n is evaluated at n_for_mu when given, else at the sufficient n.
inline TheoryConstants subgaussian_constants(const SubGaussianRegimeParams& params,
                                             std::optional<double> n_for_mu = {},
                                             std::optional<long long> k_for_bound = {},
                                             double p_econd = 0.0) {
  TheoryConstants c;
  c.regime = Regime::SubGaussian;
  c.delta = params.delta;
  c.alpha = params.effective_alpha();
  c.tau = tau(params.p, params.a);
  c.rho = 1.0;
  c.tau1 = c.tau;
  const R1R2 r = r1_r2_subgaussian(params.lambda_min, params.lambda_max, params.lambda);
  c.r1 = r.r1;
  c.r2 = r.r2;
  detail::check_r2_dominates_sqrt_r1(c.r1, c.r2);
  c.f_delta = f_delta(params.delta);
  const XiAndN xn = xi_and_n(c.r1, c.r2, params.sigma, params.kbar, c.alpha, params.delta, c.tau);
  c.xi = xn.xi;
  c.n_sufficient = xn.n_sufficient;
  const CorollaryConstants cc = corollary_constants(c.r2, c.rho, params.a);
  c.xi_bar = cc.xi_bar;
  c.r_recovery = cc.r_recovery;
  c.mu_n = mu_n(params.p, n_for_mu.value_or(static_cast<double>(c.n_sufficient)));
  c.bound_k = k_for_bound.value_or(static_cast<long long>(params.kbar));
  c.perr_bound_raw = failure_bound(c.bound_k, params.p, params.a, c.tau, c.regime, p_econd);
  c.perr_bound = clamp01(c.perr_bound_raw);
  return c;
}

// Theorem/Corollary 2 pipeline: (omega0, nu, eta) -> population constants ->
// lambdas at params.n -> r1, r2, rho -> tau1 and the sample-size constants.
inline TheoryConstants gaussian_constants(const GaussianRegimeParams& params,
                                          std::optional<long long> k_for_bound = {}) {
  TheoryConstants c;
  c.regime = Regime::Gaussian;
  c.delta = params.delta;
  c.alpha = params.effective_alpha();
  c.population = derive_population_constants(params.omega0, params.nu, params.eta, params.kbar);
  c.lambdas = gaussian_lambdas(c.population, params.p, params.n, params.kbar);
  const R1R2 band =
      r1_r2_subgaussian(c.lambdas.lambda_min, c.lambdas.lambda_max, c.lambdas.lambda);
  c.r1 = band.r1;
  c.r2 = r2_gaussian(c.population, c.lambdas.lambda_min, c.r1);
  detail::check_r2_dominates_sqrt_r1(c.r1, c.r2);
  c.rho = rho(c.population.nu1, c.population.omega, params.kbar);
  c.tau = tau(params.p, params.a);
  c.tau1 = tau1(c.tau, c.rho);
  c.f_delta = f_delta(params.delta);
  const XiAndN xn = xi_and_n(c.r1, c.r2, params.sigma, params.kbar, c.alpha, params.delta, c.tau1);
  c.xi = xn.xi;
  c.n_sufficient = xn.n_sufficient;
  const CorollaryConstants cc = corollary_constants(c.r2, c.rho, params.a);
  c.xi_bar = cc.xi_bar;
  c.r_recovery = cc.r_recovery;
  c.mu_n = mu_n(params.p, params.n);
  c.bound_k = k_for_bound.value_or(static_cast<long long>(params.kbar));
  c.perr_bound_raw = failure_bound(c.bound_k, params.p, params.a, c.tau, c.regime);
  c.perr_bound = clamp01(c.perr_bound_raw);
  return c;
}

// Corollary-3 oracle constant C1 = (4/9)(r*)^2 with r* = 2 r2* rho sqrt(1+a);
// r2* is the general r2 evaluated at nu = 1, eta = kbar.
inline OracleBound oracle_bound_ksparse(const GaussianRegimeParams& params) {
  GaussianRegimeParams star = params;
  star.nu = 1.0;
  star.eta = params.kbar;
  const PopulationConstants pc =
      derive_population_constants(star.omega0, star.nu, star.eta, star.kbar);
  const GaussianLambdas gl = gaussian_lambdas(pc, star.p, star.n, star.kbar);
  const R1R2 band = r1_r2_subgaussian(gl.lambda_min, gl.lambda_max, gl.lambda);
  OracleBound out;
  out.r2_star = r2_star(star.omega0, gl.lambda_min, band.r1);
  const double rho_value = rho(pc.nu1, pc.omega, star.kbar);
  const double r_star = 2.0 * out.r2_star * rho_value * std::sqrt(1.0 + star.a);
  out.c_constant = (4.0 / 9.0) * r_star * r_star;
  return out;
}

// Theorem-3 oracle constant C = (4/9) r^2.
inline OracleBound oracle_bound_theorem(double r_recovery) {
  OracleBound out;
  out.c_constant = (4.0 / 9.0) * r_recovery * r_recovery;
  return out;
}

// ---------------------------------------------------------------------------
// Sample-size planners
// ---------------------------------------------------------------------------

// Corollary 1: n = ceil(xi_bar * kbar * log p). No n-dependence in the
// sub-Gaussian constants, so this is a single evaluation.
inline long long corollary_n_subgaussian(const SubGaussianRegimeParams& params) {
  const TheoryConstants c = subgaussian_constants(params);
  return static_cast<long long>(std::ceil(c.xi_bar * params.kbar * std::log(params.p)));
}

namespace detail {

// The Gaussian-regime constants depend on n through h, so the sample-size
// prescriptions are self-referential. bound(n) is decreasing in n; we return
// the smallest integer n with h(n) < 1 and n >= bound(n).
template <typename BoundFn>
long long smallest_self_consistent_n(const GaussianRegimeParams& params, BoundFn bound) {
  const double root = std::sqrt(params.kbar) + std::sqrt(2.0 * std::log(params.p));
  long long lo = static_cast<long long>(std::floor(root * root)) + 1;  // h(lo) < 1
  long long hi = lo;
  const long long cap = 1ll << 56;
  while (static_cast<double>(hi) < bound(hi)) {
    if (hi >= cap)
      throw h_not_less_than_one_error("no self-consistent sample size below 2^56");
    hi *= 2;
  }
  while (lo < hi) {
    const long long mid = lo + (hi - lo) / 2;
    if (static_cast<double>(mid) >= bound(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

}  // namespace detail

// Corollary 2: smallest n with n >= xi_bar(n) * kbar * log p.
inline long long corollary_n_gaussian(GaussianRegimeParams params) {
  return detail::smallest_self_consistent_n(params, [&](long long n) {
    params.n = static_cast<double>(n);
    const TheoryConstants c = gaussian_constants(params);
    return c.xi_bar * params.kbar * std::log(params.p);
  });
}

// Theorem 2: smallest n with n >= xi(n) * kbar * tau1(n)^2.
inline long long theorem_n_gaussian(GaussianRegimeParams params) {
  return detail::smallest_self_consistent_n(params, [&](long long n) {
    params.n = static_cast<double>(n);
    const TheoryConstants c = gaussian_constants(params);
    return c.xi * params.kbar * c.tau1 * c.tau1;
  });
}

}  // namespace ompr
