#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gebc {

// Exit codes used by the CLI and shared by error categories.
//   0 ok, 2 usage/config, 3 data, 4 numeric failure.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gebc
