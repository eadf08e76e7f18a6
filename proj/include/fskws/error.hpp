#pragma once

#include <stdexcept>
#include <string>

namespace fskws {

// Base error for all failures raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (maps to a distinct process exit code).
struct ConfigError : Error {
  using Error::Error;
};

// File and stream failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace fskws
