// Error taxonomy used across the library. Everything derives from
// wheezelab::Error so callers can catch the whole family at once.
#pragma once

#include <stdexcept>
#include <string>

namespace wheezelab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input container is structurally broken (bad header, bad field count, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but an encoding/variant we do not handle.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Text parse failure; message carries the 1-based line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// Internal guard tripped (e.g. a rejection loop exceeded its draw cap).
class InternalError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

class ArchitectureError : public Error {
 public:
  using Error::Error;
};

class SearchError : public Error {
 public:
  using Error::Error;
};

}  // namespace wheezelab
