#pragma once

#include <stdexcept>
#include <string>

namespace getuda {

// Iterative numerical routine failed (non-convergence, non-finite result).
// The CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration value or unknown configuration key. Exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file. Carries a 1-based line number when known.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")"
                                     : what),
        line_number(line) {}
  long line_number;
};

}  // namespace getuda
