#pragma once

#include <stdexcept>
#include <string>

namespace sysid {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double best)
      : Error(what), best_(best) {}

  /// Best estimate reached before giving up.
  double best() const noexcept { return best_; }

private:
  double best_;
};

/// Raised when dynamics are (numerically) not stable enough for the request.
class StabilityError : public Error {
public:
  using Error::Error;
};

class DefinitenessError : public Error {
public:
  using Error::Error;
};

/// A data-derived quantity came out degenerate (e.g. a zero norm bound).
class DegenerateError : public Error {
public:
  using Error::Error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace sysid
