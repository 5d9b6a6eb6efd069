#pragma once

#include <stdexcept>
#include <string>

namespace dime {

// Base of every error raised by the library. The CLI maps ValidationError to
// exit status 1 and IoError to exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, dimension mismatches, out-of-range parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The filesystem refused a read or write.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dime
