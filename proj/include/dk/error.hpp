#pragma once

#include <stdexcept>
#include <string>

namespace dk {

enum class ErrorKind {
  InvalidParameter,
  DegenerateLaw,
  WrongIntegrator,
  Unsupported,
  Truncation,
  Configuration,
  Numerical,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library. Carries the module that raised it so
/// the CLI can name it in diagnostics.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

[[noreturn]] void fail(ErrorKind kind, const char* module, const std::string& message);

inline void require(bool condition, const char* module, const std::string& message) {
  if (!condition) fail(ErrorKind::InvalidParameter, module, message);
}

}  // namespace dk
