#pragma once

#include <stdexcept>
#include <string>

namespace facegen {

// Base for all domain errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidLandmarks : public Error {
 public:
  using Error::Error;
};

class OutOfFrame : public Error {
 public:
  using Error::Error;
};

class DegenerateSet : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace facegen
