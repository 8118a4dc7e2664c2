#pragma once

#include <stdexcept>
#include <string>

namespace mlmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BadInput : public Error {
  public:
    using Error::Error;
};

class InsufficientSamples : public Error {
  public:
    using Error::Error;
};

class InsufficientLevels : public Error {
  public:
    using Error::Error;
};

/// A path update produced a NaN or infinity.
class NonFinite : public Error {
  public:
    using Error::Error;
};

class EventCapExceeded : public Error {
  public:
    using Error::Error;
};

}  // namespace mlmc
