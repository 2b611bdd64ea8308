#include "dk/error.hpp"

namespace dk {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid parameter";
    case ErrorKind::DegenerateLaw: return "degenerate law";
    case ErrorKind::WrongIntegrator: return "wrong integrator";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Truncation: return "truncation";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(module + ": " + to_string(kind) + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

void fail(ErrorKind kind, const char* module, const std::string& message) {
  throw Error(kind, module, message);
}

}  // namespace dk
