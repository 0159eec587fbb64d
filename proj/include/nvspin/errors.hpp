#pragma once

#include <stdexcept>
#include <string>

namespace nvspin {

// Base of every failure raised by the toolkit. Input errors map to exit
// code 2 in the CLI, everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class NotHermitian : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class UnsupportedSpin : public Error {
 public:
  using Error::Error;
};

class InvalidParams : public InputError {
 public:
  using InputError::InputError;
};

class AmbiguousLabeling : public Error {
 public:
  using Error::Error;
};

class DegenerateFrame : public Error {
 public:
  using Error::Error;
};

class StepResolutionTooCoarse : public Error {
 public:
  using Error::Error;
};

class MalformedSequence : public Error {
 public:
  using Error::Error;
};

class TooFewSamples : public Error {
 public:
  using Error::Error;
};

class DegenerateTrace : public Error {
 public:
  using Error::Error;
};

}  // namespace nvspin
