#pragma once

#include <stdexcept>
#include <string>

namespace mjacobi {

enum class ErrorKind {
  invalid_input,
  domain,
  singular_block,
  convergence,
  overflow,
  validation,
  index_range,
  track_too_short,
  schema,
  io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` carries the category so
/// callers (the CLI in particular) can map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::domain: return "domain";
    case ErrorKind::singular_block: return "singular-block";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::validation: return "validation";
    case ErrorKind::index_range: return "index-range";
    case ErrorKind::track_too_short: return "track-too-short";
    case ErrorKind::schema: return "schema";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace mjacobi
