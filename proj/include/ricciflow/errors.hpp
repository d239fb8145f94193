#pragma once

#include <stdexcept>
#include <string>

namespace ricci {

// Bad scenario/grid/file description supplied by the user (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while computing: lost positivity, solver stall, parity violation...
// (CLI exit code 1).
struct NumericsError : std::runtime_error {
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ricci
