#pragma once

#include <stdexcept>
#include <string>

namespace afg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Token id or target index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Sequence longer than a configured position limit.
class LengthError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or unparsable config document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed corpus, vocabulary or input file.
class DataError : public Error {
 public:
  using Error::Error;
};

// Checkpoint version mismatch, checksum failure or incompatible weights.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Autograd misuse such as a second backward pass over a consumed graph.
class GraphError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace afg
