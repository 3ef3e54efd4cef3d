#pragma once

#include <stdexcept>
#include <string>

namespace hypermml {

// Invalid argument values (non-positive rates, bad counts, overlapping band edges).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor / payload dimensions disagree with what was declared.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown subject, segment, parameter or file.
class LookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN / Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed JSON, schema mismatch, incompatible checkpoint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hypermml
