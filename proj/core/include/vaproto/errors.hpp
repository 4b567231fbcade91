#pragma once

#include <stdexcept>
#include <string>

namespace vaproto {

// Error taxonomy mirrored by CLI exit codes: UsageError -> 2,
// DataError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments, violated preconditions, unusable configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Unreadable, malformed, or incompatible input files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or numeric divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

// One-line warning to stderr, prefixed "warning:".
void warn(const std::string& message);

}  // namespace vaproto
