// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace isoperi {

/// Invalid user input: bad dimensions, non-SPD covariance, out-of-range
/// parameters. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation could not meet its accuracy contract (quadrature did not
/// converge, an exponent overflowed, an integrand left its valid domain).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace isoperi
