#pragma once

#include <stdexcept>
#include <string>

namespace arraytune {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A position or parameter lies outside the admissible domain (e.g. a microphone outside the room).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The requested reverberation time cannot be realised with reflection coefficients below one.
class InfeasibleRoomError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or non-finite signal data, mismatched channel counts, short blocks.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A performance measure handed to the geometry adaptation is not finite.
class MeasurementError : public Error {
 public:
  using Error::Error;
};

/// The weighted coherence is undefined because all spectra are zero.
class UndefinedMeasureError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace arraytune
