#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace milfem {

// Bad configuration or CLI input; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite state detected during time stepping; exit code 3.
struct BlowupError : std::runtime_error {
  BlowupError(const std::string& msg, std::size_t step_index)
      : std::runtime_error(msg), step(step_index) {}
  std::size_t step;
};

// Explicit resource refusal (memory budget); exit code 4.
struct ResourceError : std::runtime_error {
  ResourceError(const std::string& msg, std::size_t bytes)
      : std::runtime_error(msg), required_bytes(bytes) {}
  std::size_t required_bytes;
};

} // namespace milfem
