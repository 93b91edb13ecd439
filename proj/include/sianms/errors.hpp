#pragma once

#include <stdexcept>
#include <string>

namespace sianms {

/// Base for all toolkit errors. `category()` is stable and machine-parsable;
/// the CLI maps it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

/// Malformed input file (syntax or missing fields).
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error("parse", m) {}
};

/// Structurally valid input violating a domain invariant.
struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

/// Bad or inconsistent configuration.
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

/// Geometric precondition violated (behind-camera projection, degenerate
/// axis, degenerate fit input).
struct GeometryError : Error {
  explicit GeometryError(const std::string& m) : Error("geometry", m) {}
};

/// Matched frustums do not overlap; the association is dismissed as a false
/// positive. Deliberately distinct from GeometryError so callers can route
/// dismissals separately from contract violations.
struct DisjointFrustumsError : Error {
  explicit DisjointFrustumsError(const std::string& m) : Error("dismissal", m) {}
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& m) : Error("divergence", m) {}
};

}  // namespace sianms
