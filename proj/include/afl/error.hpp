#pragma once

#include <stdexcept>
#include <string>

namespace afl {

/// Base class of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An exact enumeration or dynamic program would exceed its state budget.
class GuardExceeded : public Error {
 public:
  GuardExceeded(const std::string& what, double required, double limit)
      : Error(what + " (requires " + std::to_string(required) + ", limit " +
              std::to_string(limit) + ")"),
        required_(required),
        limit_(limit) {}

  double required() const noexcept { return required_; }
  double limit() const noexcept { return limit_; }

 private:
  double required_;
  double limit_;
};

/// A numerical procedure could not produce a meaningful answer.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace afl
