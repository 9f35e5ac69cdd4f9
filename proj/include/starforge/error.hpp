#pragma once

#include <stdexcept>
#include <string>

namespace starforge {

// Domain errors map to CLI exit status 1, parse/usage errors to 2.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : std::runtime_error(msg + " at line " + std::to_string(line) + ", column " +
                           std::to_string(column)),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class DimensionMismatch : public DomainError {
 public:
  using DomainError::DomainError;
};

class TruncationMismatch : public DomainError {
 public:
  using DomainError::DomainError;
};

class CcrViolation : public DomainError {
 public:
  CcrViolation(const std::string& msg, int degree)
      : DomainError(msg + " (degree " + std::to_string(degree) + ")"), degree_(degree) {}
  int degree() const { return degree_; }

 private:
  int degree_;
};

class SingularityError : public DomainError {
 public:
  SingularityError(const std::string& msg, double t)
      : DomainError(msg + " near t = " + std::to_string(t)), t_(t) {}
  double critical_t() const { return t_; }

 private:
  double t_;
};

}  // namespace starforge
