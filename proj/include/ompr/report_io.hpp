#pragma once

#include <fstream>
#include <json.hpp>
#include <ostream>
#include <string>

#include "ompr/csv.hpp"
#include "ompr/designs.hpp"
#include "ompr/harness.hpp"
#include "ompr/theory.hpp"

namespace ompr {

using ordered_json = nlohmann::ordered_json;

inline ordered_json theory_to_json(const TheoryConstants& c) {
  ordered_json j;
  j["regime"] = to_string(c.regime);
  j["mu_n"] = c.mu_n;
  j["tau"] = c.tau;
  j["tau1"] = c.tau1;
  j["rho"] = c.rho;
  j["r1"] = c.r1;
  j["r2"] = c.r2;
  j["f_delta"] = c.f_delta;
  j["xi"] = c.xi;
  j["n_sufficient"] = c.n_sufficient;
  j["xi_bar"] = c.xi_bar;
  j["r"] = c.r_recovery;
  j["alpha"] = c.alpha;
  j["delta"] = c.delta;
  j["bound_k"] = c.bound_k;
  j["perr_bound_raw"] = c.perr_bound_raw;
  j["perr_bound"] = c.perr_bound;
  if (c.regime == Regime::Gaussian) {
    ordered_json d;
    d["s_min"] = c.population.s_min;
    d["s_max"] = c.population.s_max;
    d["omega"] = c.population.omega;
    d["nu1_tilde"] = c.population.nu1_tilde;
    d["nu1"] = c.population.nu1;
    d["eta_bar"] = c.population.eta_bar;
    d["h"] = c.lambdas.h;
    d["h_ell"] = c.lambdas.h_ell;
    d["h_u"] = c.lambdas.h_u;
    d["lambda_min"] = c.lambdas.lambda_min;
    d["lambda_max"] = c.lambdas.lambda_max;
    d["lambda"] = c.lambdas.lambda;
    j["derived"] = d;
  }
  return j;
}

// Serialized report. Wall time stays out on purpose: two runs with the same
// master seed must produce byte-identical files.
inline ordered_json report_to_json(const ExperimentReport& r) {
  ordered_json j;
  j["regime"] = to_string(r.regime);
  j["n"] = r.n;
  j["p"] = r.p;
  j["k"] = r.k;
  j["trials"] = r.trials;
  j["master_seed"] = r.master_seed;
  j["theory"] = theory_to_json(r.theory);
  j["empirical_failure_rate"] = r.empirical_failure_rate;
  j["theoretical_bound_raw"] = r.theoretical_bound_raw;
  j["theoretical_bound"] = r.theoretical_bound;
  j["rate_not_subset"] = r.rate_not_subset;
  j["rate_not_partial"] = r.rate_not_partial;
  j["rate_not_exact"] = r.rate_not_exact;
  j["rate_not_large"] = r.rate_not_large;
  j["oracle_violations"] = r.oracle_violations;
  j["oracle_violations_subset_ok"] = r.oracle_violations_subset_ok;
  j["gram_singular_trials"] = r.gram_singular_trials;
  return j;
}

inline ordered_json condition_report_to_json(const ConditionReport& r) {
  ordered_json j;
  j["lambda_min_hat"] = r.lambda_min_hat ? ordered_json(*r.lambda_min_hat) : ordered_json(nullptr);
  j["lambda_max_hat"] = r.lambda_max_hat ? ordered_json(*r.lambda_max_hat) : ordered_json(nullptr);
  j["noise_energy"] = r.noise_energy ? ordered_json(*r.noise_energy) : ordered_json(nullptr);
  j["coherence_x"] = r.coherence_x;
  j["condition1_ok"] = r.condition1_ok ? ordered_json(*r.condition1_ok) : ordered_json(nullptr);
  j["condition2_ok"] = r.condition2_ok ? ordered_json(*r.condition2_ok) : ordered_json(nullptr);
  return j;
}

inline ordered_json tails_to_json(const TailBoundReport& r) {
  ordered_json j;
  j["trials"] = r.trials;
  j["p"] = r.p;
  j["n"] = r.n;
  j["a"] = r.a;
  j["rho_threshold"] = r.rho_threshold;
  j["mu_n"] = r.mu;
  j["max_rate"] = r.max_rate;
  j["max_bound"] = r.max_bound;
  j["max_ok"] = r.max_rate <= r.max_bound;
  j["chi_rate"] = r.chi_rate;
  j["chi_bound"] = r.chi_bound;
  j["chi_ok"] = r.chi_rate <= r.chi_bound;
  return j;
}

inline const char* trial_csv_header() {
  return "trial_index,seed,n,p,k,steps,subset_ok,partial_ok,exact_ok,large_recovered,"
         "l2_error_sq,oracle_bound_value,stop_reason";
}

inline void write_trial_rows(std::ostream& out, const ExperimentReport& r) {
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    const TrialOutcome& o = r.outcomes[i];
    out << i << ',' << o.seed << ',' << r.n << ',' << r.p << ',' << r.k << ',' << o.steps << ','
        << (o.subset_ok ? 1 : 0) << ',' << (o.partial_ok ? 1 : 0) << ',' << (o.exact_ok ? 1 : 0)
        << ',' << (o.large_recovered ? 1 : 0) << ',' << format_double(o.l2_error_sq) << ','
        << format_double(o.oracle_bound_value) << ',' << to_string(o.stop_reason) << '\n';
  }
}

}  // namespace ompr
