#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spiked {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition of an operation was not met (shape mismatch,
// out-of-range parameter, non-symmetric input, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A requested tensor would exceed the configured entry budget.
class SizingError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent user configuration. `field` names the offending
// JSON field or CLI flag.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// An iterative method failed to converge. Carries whatever partial state the
// method had produced when it gave up.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::vector<double> partial = {})
      : Error(what), partial_(std::move(partial)) {}

  const std::vector<double>& partial_state() const noexcept { return partial_; }

 private:
  std::vector<double> partial_;
};

}  // namespace spiked
