#pragma once

#include <stdexcept>
#include <string>

namespace qsize {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  Usage,         // bad arguments or malformed configuration
  Schema,        // configuration parses but violates the schema
  Inadmissible,  // distribution or measure outside the supported class
  Infeasible,    // optimization model has no feasible point
  Numerical,     // quadrature, solver or convergence failure
  Domain,        // argument outside a function's domain
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable tag, e.g. "QuadratureFailure".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error inadmissible(const std::string& msg) {
  return Error(ErrorKind::Inadmissible, "Inadmissible", msg);
}
inline Error numerical(std::string code, const std::string& msg) {
  return Error(ErrorKind::Numerical, std::move(code), msg);
}
inline Error infeasible(std::string code, const std::string& msg) {
  return Error(ErrorKind::Infeasible, std::move(code), msg);
}
inline Error domain_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::Domain, std::move(code), msg);
}

/// Schema violation located at a config line (0 when unknown).
class SchemaError : public Error {
 public:
  SchemaError(int line, std::string field, const std::string& msg)
      : Error(ErrorKind::Schema, "SchemaError",
              "line " + std::to_string(line) + ", field '" + field + "': " + msg),
        line_(line), field_(std::move(field)), message_(msg) {}

  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }
  /// The message without the location prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  int line_;
  std::string field_;
  std::string message_;
};

/// CLI exit code for an error kind.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Infeasible:
      return 2;
    case ErrorKind::Numerical:
      return 3;
    default:
      return 1;
  }
}

}  // namespace qsize
