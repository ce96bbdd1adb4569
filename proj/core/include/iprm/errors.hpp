#pragma once

#include <stdexcept>
#include <string>

namespace iprm {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent or missing configuration (e.g. scoring with a reference
// when the trace carries none).
struct ConfigError : Error {
  using Error::Error;
};

// Input data violates a documented invariant (lengths, step boundaries,
// positive log-probabilities, bad labels).
struct ValidationError : Error {
  using Error::Error;
};

// An operation was called outside its domain (prefix too long, token out
// of vocabulary, n out of range).
struct DomainError : Error {
  using Error::Error;
};

// An exact computation would exceed the enumeration cap.
struct ResourceError : Error {
  using Error::Error;
};

// Persistence-layer failures: unreadable files, unknown format versions,
// malformed records. Carries a line number when one is known.
struct IoError : Error {
  using Error::Error;
};

}  // namespace iprm
