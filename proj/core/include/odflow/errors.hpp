#pragma once

#include <stdexcept>
#include <string>

namespace odflow {

// Raised for invalid user input or configuration (bad flags, missing CSV
// columns, incompatible checkpoints). The CLI maps it to exit code 1; every
// other exception maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace odflow
