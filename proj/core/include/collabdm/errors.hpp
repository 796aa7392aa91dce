#pragma once

#include <stdexcept>
#include <string>

namespace collabdm {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shape or axis mismatch between tensors.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value (specs, partition parameters, CLI flags).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed on-disk file (bad magic, truncation, out-of-range field).
class FormatError : public Error {
public:
  using Error::Error;
};

/// Malformed wire message or schedule/payload mismatch.
class ProtocolError : public Error {
public:
  using Error::Error;
};

/// Invalid runtime input value (e.g. label out of range, empty shard).
class InputError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace collabdm
