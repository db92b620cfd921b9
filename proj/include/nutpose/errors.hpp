#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nutpose {

/// Malformed text or binary input. `where` is a line number for line-based
/// formats (xyz frames, OBJ) and a byte offset for binary ones (PGM/PPM,
/// prerender cache); the message says which.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t where)
      : std::runtime_error(msg), where_(where) {}

  std::size_t where() const { return where_; }

 private:
  std::size_t where_;
};

/// Bad or unknown key in a pipeline config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a scoring call has no points left to rank (empty input, or
/// every model point classified as occluded).
class NoScorablePoints : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nutpose
