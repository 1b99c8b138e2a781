#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pricelab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad arguments to a pure operation (non-finite price, index out of range, ...).
struct InvalidInput : Error {
  using Error::Error;
};

// Equilibrium solver did not reach the requested tolerance.
struct SolverFailure : Error {
  SolverFailure(const std::string& msg, double residual)
      : Error(msg), residual(residual) {}
  double residual;
};

// A configuration file failed parsing or validation. `issues` lists every
// violated constraint, not just the first one.
struct ConfigError : Error {
  explicit ConfigError(std::vector<std::string> issues_)
      : Error(join(issues_)), issues(std::move(issues_)) {}
  std::vector<std::string> issues;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "config error";
    for (const auto& i : v) {
      s += "\n  - " + i;
    }
    return s;
  }
};

// Test assignment whose policies do not share a grid/observation mode, or
// whose evaluation context does not match the policies' own parameters.
struct InvalidAssignment : Error {
  using Error::Error;
};

// Requested a configuration the engine does not implement (e.g. N != 2).
struct UnsupportedConfig : Error {
  using Error::Error;
};

// Filesystem failure, message carries the path.
struct IoError : Error {
  using Error::Error;
};

}  // namespace pricelab
