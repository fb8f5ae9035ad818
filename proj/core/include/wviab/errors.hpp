#pragma once

#include <stdexcept>
#include <string>

namespace wviab {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input at construction time (weights that do not
/// sum to one, empty clouds, non-finite coordinates, bad options).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or structurally invalid external input (JSON, CSV, CLI args).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Objects of incompatible ambient dimension were combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A computation left the representable range or failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A tangent vector was used with a measure it was not sampled on.
class BaseMismatchError : public Error {
 public:
  using Error::Error;
};

/// A selection's control list does not match its time grid or control family.
class ControlGridMismatch : public Error {
 public:
  using Error::Error;
};

/// An operation that requires a state inside the constraint set was started
/// from a state outside it.
class NotInConstraint : public Error {
 public:
  using Error::Error;
};

/// A functional was evaluated outside its effective domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace wviab
