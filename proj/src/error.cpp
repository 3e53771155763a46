#include "cvsim/error.hpp"

#include <fmt/format.h>

namespace cvsim {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::wiring: return "wiring";
    case ErrorKind::invalid_operator: return "invalid-operator";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::refusal: return "refusal";
    case ErrorKind::syntax: return "syntax";
    case ErrorKind::semantic: return "semantic";
  }
  return "unknown";
}

namespace {

std::string format_parse_error(ErrorKind kind, int line, int column,
                               const std::string& message,
                               const std::vector<std::string>& expected) {
  std::string text = fmt::format("{}:{}: {} error: {}", line, column,
                                 kind == ErrorKind::syntax ? "syntax" : "semantic",
                                 message);
  if (!expected.empty()) {
    text += fmt::format(" (expected one of: {})", fmt::join(expected, ", "));
  }
  return text;
}

}  // namespace

ParseError::ParseError(ErrorKind kind, int line, int column, const std::string& message,
                       std::vector<std::string> expected)
    : Error(kind, format_parse_error(kind, line, column, message, expected)),
      line_(line),
      column_(column),
      message_(message),
      expected_(std::move(expected)) {}

}  // namespace cvsim
