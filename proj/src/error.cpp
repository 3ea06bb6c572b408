#include "eabp/error.hpp"

namespace eabp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::config: return "configuration error";
  case ErrorKind::shape: return "shape error";
  case ErrorKind::domain: return "domain error";
  case ErrorKind::unsupported_order: return "unsupported derivative order";
  case ErrorKind::training_diverged: return "training diverged";
  case ErrorKind::conditioning: return "conditioning error";
  case ErrorKind::internal: return "internal consistency error";
  case ErrorKind::io: return "io error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> epoch)
    : std::runtime_error(message), kind_(kind), epoch_(epoch) {}

Error Error::with_stage(std::string_view stage) const {
  return Error(kind_, std::string(stage) + ": " + what(), epoch_);
}

int exit_code(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::config:
  case ErrorKind::shape:
  case ErrorKind::domain:
  case ErrorKind::unsupported_order:
    return 2;
  case ErrorKind::training_diverged:
  case ErrorKind::conditioning:
  case ErrorKind::internal:
    return 3;
  case ErrorKind::io:
    return 1;
  }
  return 1;
}

} // namespace eabp
