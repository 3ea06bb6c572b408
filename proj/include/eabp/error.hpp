#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eabp {

enum class ErrorKind {
  config,            // invalid user-facing configuration
  shape,             // dimension mismatch
  domain,            // argument outside the valid domain
  unsupported_order, // derivative order the jets cannot carry
  training_diverged, // NaN/Inf during optimization
  conditioning,      // numerically non-SPD linear system
  internal,          // inconsistent internal state (tape/params mismatch)
  io,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> epoch = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }

  // Epoch index for training_diverged errors.
  std::optional<std::size_t> epoch() const noexcept { return epoch_; }

  // Same error with "<stage>: " prefixed to the message.
  Error with_stage(std::string_view stage) const;

private:
  ErrorKind kind_;
  std::optional<std::size_t> epoch_;
};

// Process exit code for the CLI: 2 for configuration-type errors, 3 for numeric failures.
int exit_code(ErrorKind kind);

} // namespace eabp
