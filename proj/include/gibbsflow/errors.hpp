#pragma once

#include <stdexcept>
#include <string>

namespace gibbsflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Request outside an operation's contract (wrong drift family, volume too large, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configuration or boundary condition lacks a site the computation reads.
class MissingSiteError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Overflow, NaN, or an enumeration cap. Results past this point are not trustworthy.
class NumericalGuardError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gibbsflow
