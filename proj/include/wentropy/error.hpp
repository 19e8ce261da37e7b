#pragma once

#include <stdexcept>
#include <string>

namespace wentropy {

/// Broad failure classes. The CLI maps them onto exit codes.
enum class ErrorKind {
  invalid_argument,  // bad sizes, out-of-range sites, mismatched inputs
  config,            // unparseable or inconsistent run configuration
  numerical,         // conditioning, resolution, convergence, cost budget
  parse,             // malformed input files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), kind_(kind), module_(module) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::config:
    case ErrorKind::parse:
      return 2;
    case ErrorKind::numerical:
      return 3;
  }
  return 3;
}

}  // namespace wentropy
