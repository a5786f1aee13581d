#pragma once

#include <stdexcept>
#include <string>

namespace ignet {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / layout violations.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad argument values that are not shape related.
class ValueError : public Error {
 public:
  explicit ValueError(const std::string& msg) : Error(msg) {}
};

// File reading/writing problems; message carries the path.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Config file / CLI option problems.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Checkpoint container problems, one kind per failure mode.
class CheckpointError : public Error {
 public:
  enum class Kind { BadMagic, BadVersion, Truncated, Mismatch, Malformed };

  CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Training-loop failures (non-finite loss, bad gradients).
class TrainError : public Error {
 public:
  explicit TrainError(const std::string& msg) : Error(msg) {}
};

}  // namespace ignet
