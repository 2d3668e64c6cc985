#pragma once

#include <stdexcept>
#include <string>

namespace chofuse {

// Bad input data: unreadable files, malformed rows, invalid labels or
// densities. Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown, e.g. a root bracketing failure. Maps to CLI exit
// code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chofuse
