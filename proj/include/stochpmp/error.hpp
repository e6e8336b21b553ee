#pragma once

#include <stdexcept>
#include <string>

namespace stochpmp {

/// Malformed input: bad dimensions, unknown names, invalid JSON, out-of-range
/// parameters. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: non-finite states or coefficients, rank-deficient
/// regressions. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace stochpmp
