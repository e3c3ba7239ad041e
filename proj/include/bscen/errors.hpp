#pragma once

#include <stdexcept>
#include <string>

namespace bscen {

// Base for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: config, files, restriction specs, dimension mismatches.
class InputError : public Error {
 public:
  using Error::Error;
};

// A transform or density evaluated outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Factorization failures, degenerate weights, non-finite draws.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace bscen
