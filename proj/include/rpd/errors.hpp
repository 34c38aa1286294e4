#pragma once

#include <stdexcept>
#include <string>

namespace rpd {

// Bad run configuration (unknown keys, malformed values). CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data (datasets, lexicons, checkpoints). CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rpd
