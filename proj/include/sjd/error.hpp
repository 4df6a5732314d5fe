#pragma once

#include <stdexcept>
#include <string>

namespace sjd {

// Operand shapes disagree (e.g. two distributions over different vocabularies).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A requested normalization has no mass to normalize.
class ZeroMassError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A precondition on an argument value was violated.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A sequence would exceed the model's maximum length.
class LengthError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// An enumeration or table would exceed its size budget.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace sjd
