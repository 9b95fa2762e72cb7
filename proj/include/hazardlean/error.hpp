#pragma once

#include <stdexcept>
#include <string>

namespace hazardlean {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// argument outside the mathematical domain (negative hazard, t > 1, ...)
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// bad call pattern, e.g. overlapping folds
class UsageError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

// solver trouble: singular systems, divergence, degenerate variance
class NumericError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace hazardlean
