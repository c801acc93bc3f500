#pragma once

#include <stdexcept>
#include <string>

namespace npwarx {

enum class ErrorKind {
  usage,
  io,
  data,
  numeric,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::io: return "io";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

/// Exception carrying a coarse category, used by the CLI to pick exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& msg) { return {ErrorKind::usage, msg}; }
inline Error io_error(const std::string& msg) { return {ErrorKind::io, msg}; }
inline Error data_error(const std::string& msg) { return {ErrorKind::data, msg}; }
inline Error numeric_error(const std::string& msg) { return {ErrorKind::numeric, msg}; }

}  // namespace npwarx
