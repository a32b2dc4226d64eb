#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ompr/harness.hpp"

namespace ompr {

struct config_parse_error : std::invalid_argument {
  explicit config_parse_error(const std::string& what)
      : std::invalid_argument("ConfigParse: " + what) {}
};

// Parsed run request: the experiment itself, output paths, and an optional
// single-key sweep.
struct RunPlan {
  ExperimentConfig base;
  std::string sigma_csv;             // explicit Sigma, loaded by the caller
  std::string report_json;
  std::string trials_csv;
  std::string plot_csv;
  std::string sweep_key;             // one of n, p, k, sigma, omega0, eta, beta_min
  std::vector<double> sweep_values;
};

namespace detail {

// Strict flat `key = value` document: '#' comments, no sections, every key
// must be known and appear at most once. spec_version = 1 is mandatory.
class ConfigDoc {
 public:
  ConfigDoc(std::istream& in, std::string origin) : origin_(std::move(origin)) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) fail(line_no, "empty key");
      if (value.empty()) fail(line_no, "empty value for key '" + key + "'");
      if (!entries_.emplace(key, Entry{value, line_no}).second)
        fail(line_no, "duplicate key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::string require_string(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw config_parse_error(origin_ + ": missing key '" + key + "'");
    it->second.consumed = true;
    return it->second.value;
  }

  std::string optional_string(const std::string& key, const std::string& fallback) {
    return has(key) ? require_string(key) : fallback;
  }

  long long require_int(const std::string& key) { return to_int(key, require_string(key)); }

  long long optional_int(const std::string& key, long long fallback) {
    return has(key) ? require_int(key) : fallback;
  }

  double require_double(const std::string& key) { return to_double(key, require_string(key)); }

  double optional_double(const std::string& key, double fallback) {
    return has(key) ? require_double(key) : fallback;
  }

  bool optional_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = require_string(key);
    if (v == "true") return true;
    if (v == "false") return false;
    fail_key(key, "expected true or false");
    return false;
  }

  std::vector<double> require_double_list(const std::string& key) {
    const std::string raw = require_string(key);
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(to_double(key, trim(cell)));
    if (out.empty()) fail_key(key, "expected a comma-separated list");
    return out;
  }

  void forbid(const std::string& key, const std::string& why) {
    if (has(key)) fail_key(key, why);
  }

  // Every key must have been consumed by now.
  void finish() const {
    for (const auto& [key, entry] : entries_) {
      if (!entry.consumed)
        throw config_parse_error(origin_ + ":" + std::to_string(entry.line) + ": unknown key '" +
                                 key + "'");
    }
  }

  [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const {
    const auto it = entries_.find(key);
    const std::string where =
        it == entries_.end() ? origin_ : origin_ + ":" + std::to_string(it->second.line);
    throw config_parse_error(where + ": key '" + key + "': " + msg);
  }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    bool consumed = false;
  };

  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw config_parse_error(origin_ + ":" + std::to_string(line) + ": " + msg);
  }

  long long to_int(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing characters");
      return x;
    } catch (const std::exception&) {
      fail_key(key, "expected an integer, got '" + v + "'");
    }
  }

  double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing characters");
      return x;
    } catch (const std::exception&) {
      fail_key(key, "expected a number, got '" + v + "'");
    }
  }

  std::string origin_;
  std::map<std::string, Entry> entries_;
};

}  // namespace detail

inline RunPlan parse_config(std::istream& in, const std::string& origin) {
  detail::ConfigDoc doc(in, origin);
  RunPlan plan;
  ExperimentConfig& cfg = plan.base;

  if (doc.require_int("spec_version") != 1)
    doc.fail_key("spec_version", "only spec_version = 1 is supported");

  const std::string regime = doc.require_string("regime");
  if (regime == "subgaussian")
    cfg.regime = Regime::SubGaussian;
  else if (regime == "gaussian")
    cfg.regime = Regime::Gaussian;
  else
    doc.fail_key("regime", "expected subgaussian or gaussian");

  cfg.trials = doc.require_int("trials");
  cfg.master_seed = static_cast<std::uint64_t>(doc.require_int("master_seed"));
  cfg.workers = static_cast<int>(doc.optional_int("workers", 0));
  cfg.record_traces = doc.optional_bool("record_traces", false);

  const std::string n_rule = doc.require_string("n_rule");
  if (n_rule == "explicit") {
    cfg.n_rule = NRule::Explicit;
    cfg.design.n = doc.require_int("n");
  } else if (n_rule == "from_theorem" || n_rule == "from_corollary") {
    cfg.n_rule = n_rule == "from_theorem" ? NRule::FromTheorem : NRule::FromCorollary;
    doc.forbid("n", "n is derived under n_rule = " + n_rule);
  } else {
    doc.fail_key("n_rule", "expected explicit, from_theorem or from_corollary");
  }

  cfg.design.p = doc.require_int("p");
  const std::string ensemble = doc.require_string("ensemble");
  if (ensemble == "iid_gaussian")
    cfg.design.ensemble = Ensemble::IidGaussian;
  else if (ensemble == "iid_rademacher")
    cfg.design.ensemble = Ensemble::IidRademacher;
  else if (ensemble == "correlated_gaussian")
    cfg.design.ensemble = Ensemble::CorrelatedGaussian;
  else
    doc.fail_key("ensemble", "expected iid_gaussian, iid_rademacher or correlated_gaussian");

  if (cfg.design.ensemble == Ensemble::CorrelatedGaussian) {
    const std::string kind = doc.require_string("sigma_kind");
    if (kind == "identity") {
      cfg.design.sigma = SigmaSpec::identity();
    } else if (kind == "constant_off_diagonal") {
      cfg.design.sigma = SigmaSpec::constant_off_diagonal(
          doc.require_double("sigma_c"), static_cast<int>(doc.require_int("sigma_kbar")));
    } else if (kind == "explicit_csv") {
      // Loaded lazily by the CLI so the parser stays filesystem-free.
      cfg.design.sigma.kind = SigmaSpec::Kind::Explicit;
      plan.base.design.sigma.matrix.resize(0, 0);
      plan.sigma_csv = doc.require_string("sigma_csv");
    } else {
      doc.fail_key("sigma_kind", "expected identity, constant_off_diagonal or explicit_csv");
    }
  } else {
    doc.forbid("sigma_kind", "only meaningful for correlated_gaussian");
    doc.forbid("sigma_c", "only meaningful for correlated_gaussian");
    doc.forbid("sigma_kbar", "only meaningful for correlated_gaussian");
    doc.forbid("sigma_csv", "only meaningful for correlated_gaussian");
  }

  const std::string noise = doc.optional_string("noise_kind", "gaussian");
  if (noise == "gaussian")
    cfg.noise_kind = NoiseKind::Gaussian;
  else if (noise == "rademacher")
    cfg.noise_kind = NoiseKind::Rademacher;
  else
    doc.fail_key("noise_kind", "expected gaussian or rademacher");

  const double sigma = doc.require_double("sigma");

  const std::string coeff_kind = doc.require_string("coeff_kind");
  cfg.coefficients.k = static_cast<int>(doc.require_int("k"));
  cfg.coefficients.beta_min = doc.require_double("beta_min");
  const std::string sign = doc.optional_string("sign_rule", "random");
  if (sign == "random")
    cfg.coefficients.sign_rule = SignRule::Random;
  else if (sign == "all_positive")
    cfg.coefficients.sign_rule = SignRule::AllPositive;
  else
    doc.fail_key("sign_rule", "expected random or all_positive");
  const std::string support = doc.optional_string("support_rule", "uniform_random");
  if (support == "uniform_random")
    cfg.coefficients.support_rule = SupportRule::UniformRandom;
  else if (support == "first_k")
    cfg.coefficients.support_rule = SupportRule::FirstK;
  else
    doc.fail_key("support_rule", "expected uniform_random or first_k");

  if (coeff_kind == "exact_sparse") {
    cfg.coefficients.kind = CoefficientSpec::Kind::ExactSparse;
    const std::string mags = doc.optional_string("magnitudes", "all_equal");
    if (mags == "all_equal")
      cfg.coefficients.magnitudes = Magnitudes::AllEqual;
    else if (mags == "uniform_above_min")
      cfg.coefficients.magnitudes = Magnitudes::UniformAboveMin;
    else
      doc.fail_key("magnitudes", "expected all_equal or uniform_above_min");
    doc.forbid("coeff_eta", "only meaningful for compressible coefficients");
    doc.forbid("coeff_nu", "only meaningful for compressible coefficients");
  } else if (coeff_kind == "compressible") {
    cfg.coefficients.kind = CoefficientSpec::Kind::Compressible;
    cfg.coefficients.eta = doc.require_double("coeff_eta");
    cfg.coefficients.nu = doc.require_double("coeff_nu");
    doc.forbid("magnitudes", "only meaningful for exact_sparse coefficients");
  } else {
    doc.fail_key("coeff_kind", "expected exact_sparse or compressible");
  }

  const double kbar = doc.require_double("kbar");
  const double a = doc.require_double("a");
  const double delta = doc.optional_double("delta", 3.0);
  std::optional<double> alpha;
  if (doc.has("alpha")) alpha = doc.require_double("alpha");

  if (cfg.regime == Regime::SubGaussian) {
    cfg.subgaussian.p = static_cast<double>(cfg.design.p);
    cfg.subgaussian.kbar = kbar;
    cfg.subgaussian.a = a;
    cfg.subgaussian.sigma = sigma;
    cfg.subgaussian.delta = delta;
    cfg.subgaussian.alpha = alpha;
    cfg.subgaussian.lambda_min = doc.require_double("lambda_min");
    cfg.subgaussian.lambda_max = doc.require_double("lambda_max");
    cfg.subgaussian.lambda = doc.require_double("lambda");
    doc.forbid("omega0", "sub-Gaussian regime takes the lambda band instead");
    doc.forbid("theory_nu", "sub-Gaussian regime takes the lambda band instead");
    doc.forbid("theory_eta", "sub-Gaussian regime takes the lambda band instead");
  } else {
    cfg.gaussian.p = static_cast<double>(cfg.design.p);
    cfg.gaussian.n = static_cast<double>(cfg.design.n);
    cfg.gaussian.kbar = kbar;
    cfg.gaussian.a = a;
    cfg.gaussian.sigma = sigma;
    cfg.gaussian.delta = delta;
    cfg.gaussian.alpha = alpha;
    cfg.gaussian.omega0 = doc.require_double("omega0");
    cfg.gaussian.nu = doc.require_double("theory_nu");
    cfg.gaussian.eta = doc.require_double("theory_eta");
    doc.forbid("lambda_min", "Gaussian regime derives its lambdas");
    doc.forbid("lambda_max", "Gaussian regime derives its lambdas");
    doc.forbid("lambda", "Gaussian regime derives its lambdas");
  }

  plan.report_json = doc.optional_string("report_json", "");
  plan.trials_csv = doc.optional_string("trials_csv", "");
  plan.plot_csv = doc.optional_string("plot_csv", "");

  if (doc.has("sweep_key")) {
    plan.sweep_key = doc.require_string("sweep_key");
    static const char* allowed[] = {"n", "p", "k", "sigma", "omega0", "eta", "beta_min"};
    if (std::find_if(std::begin(allowed), std::end(allowed), [&](const char* s) {
          return plan.sweep_key == s;
        }) == std::end(allowed))
      doc.fail_key("sweep_key", "expected one of n, p, k, sigma, omega0, eta, beta_min");
    plan.sweep_values = doc.require_double_list("sweep_values");
    if (plan.sweep_key == "n" && cfg.n_rule != NRule::Explicit)
      doc.fail_key("sweep_key", "sweeping n requires n_rule = explicit");
    if (plan.sweep_key == "omega0" && cfg.regime != Regime::Gaussian)
      doc.fail_key("sweep_key", "omega0 only exists in the gaussian regime");
    if (plan.sweep_key == "eta" && cfg.coefficients.kind != CoefficientSpec::Kind::Compressible)
      doc.fail_key("sweep_key", "eta sweeps need compressible coefficients");
  } else {
    doc.forbid("sweep_values", "sweep_values requires sweep_key");
  }

  doc.finish();
  return plan;
}

inline RunPlan parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_parse_error("cannot open '" + path + "'");
  return parse_config(in, path);
}

// Applies one sweep value to a copy of the base config.
inline ExperimentConfig apply_sweep_value(const RunPlan& plan, double value) {
  ExperimentConfig cfg = plan.base;
  const auto as_count = [&](const char* what) {
    const auto v = static_cast<long long>(value);
    if (static_cast<double>(v) != value || v < 0)
      throw config_parse_error(std::string("sweep value for ") + what +
                               " must be a nonnegative integer");
    return v;
  };
  if (plan.sweep_key == "n") {
    cfg.design.n = as_count("n");
    cfg.gaussian.n = value;
  } else if (plan.sweep_key == "p") {
    cfg.design.p = as_count("p");
    cfg.subgaussian.p = value;
    cfg.gaussian.p = value;
  } else if (plan.sweep_key == "k") {
    cfg.coefficients.k = static_cast<int>(as_count("k"));
  } else if (plan.sweep_key == "sigma") {
    cfg.subgaussian.sigma = value;
    cfg.gaussian.sigma = value;
  } else if (plan.sweep_key == "omega0") {
    cfg.gaussian.omega0 = value;
  } else if (plan.sweep_key == "eta") {
    cfg.coefficients.eta = value;
    cfg.gaussian.eta = value;
  } else if (plan.sweep_key == "beta_min") {
    cfg.coefficients.beta_min = value;
  } else if (!plan.sweep_key.empty()) {
    throw config_parse_error("unknown sweep key '" + plan.sweep_key + "'");
  }
  return cfg;
}

}  // namespace ompr
