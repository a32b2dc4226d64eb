#pragma once

#include <stdexcept>
#include <string>

namespace ompr {

// Error taxonomy shared across the library. Messages are prefixed with a
// stable identifier so CLI callers can report the failure by name.

struct dimension_mismatch_error : std::invalid_argument {
  explicit dimension_mismatch_error(const std::string& what)
      : std::invalid_argument("DimensionMismatch: " + what) {}
};

struct zero_residual_error : std::runtime_error {
  zero_residual_error() : std::runtime_error("ZeroResidual: statistic undefined for a zero residual") {}
};

struct gram_singular_error : std::runtime_error {
  explicit gram_singular_error(const std::string& what)
      : std::runtime_error("GramSingular: " + what) {}
};

struct sigma_not_pd_error : std::invalid_argument {
  explicit sigma_not_pd_error(const std::string& what)
      : std::invalid_argument("SigmaNotPD: " + what) {}
};

struct infeasible_tail_error : std::invalid_argument {
  explicit infeasible_tail_error(const std::string& what)
      : std::invalid_argument("InfeasibleTail: " + what) {}
};

struct too_large_error : std::invalid_argument {
  explicit too_large_error(const std::string& what)
      : std::invalid_argument("TooLarge: " + what) {}
};

struct h_not_less_than_one_error : std::invalid_argument {
  explicit h_not_less_than_one_error(const std::string& what)
      : std::invalid_argument("HNotLessThanOne: " + what) {}
};

}  // namespace ompr
