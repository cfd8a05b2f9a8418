#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twophase {

enum class ErrorKind {
  parse,
  duplicate_id,
  unknown_id,
  out_of_range,
  no_data,
  domain,
  config,
  exhausted,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::duplicate_id: return "duplicate_id";
    case ErrorKind::unknown_id: return "unknown_id";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::no_data: return "no_data";
    case ErrorKind::domain: return "domain";
    case ErrorKind::config: return "config";
    case ErrorKind::exhausted: return "exhausted";
  }
  return "unknown";
}

// All validation failures raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace twophase
