#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cvsim {

enum class ErrorKind {
  invalid_argument,
  wiring,
  invalid_operator,
  numerical,
  refusal,
  syntax,
  semantic,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::invalid_argument, what) {}
};

/// Mode index out of range, repeated modes, or mismatched mode sets.
class WiringError : public Error {
 public:
  explicit WiringError(const std::string& what) : Error(ErrorKind::wiring, what) {}
};

/// An operator that violates its defining invariant (symplecticity, CP).
class InvalidOperator : public Error {
 public:
  explicit InvalidOperator(const std::string& what)
      : Error(ErrorKind::invalid_operator, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

/// Raised when the Gaussian engine is asked to run a non-Gaussian element.
class RefusalError : public Error {
 public:
  RefusalError(const std::string& what, int node)
      : Error(ErrorKind::refusal, what), node_(node) {}

  int node() const noexcept { return node_; }

 private:
  int node_;
};

/// Syntax or semantic error in circuit source, with a 1-based location.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, int line, int column, const std::string& message,
             std::vector<std::string> expected = {});

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& message() const noexcept { return message_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  int line_;
  int column_;
  std::string message_;
  std::vector<std::string> expected_;
};

}  // namespace cvsim
