#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmwb {

/// Base class of every error raised by the workbench.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class UnknownInstruction : public Error {
public:
  explicit UnknownInstruction(std::string id)
      : Error("unknown instruction '" + id + "'"), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

private:
  std::string id_;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed input file. line/offset are 1-based; 0 means unknown.
class FormatError : public Error {
public:
  FormatError(const std::string& what, std::size_t line = 0, std::size_t offset = 0)
      : Error(line == 0 ? what
                        : what + " (line " + std::to_string(line) + ", offset " +
                              std::to_string(offset) + ")"),
        line_(line),
        offset_(offset) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t line_;
  std::size_t offset_;
};

class BackendFailure : public Error {
public:
  using Error::Error;
};

/// Raised when measurements contradict the port mapping model.
class ModelViolation : public Error {
public:
  using Error::Error;
};

class NonIntegralPortCount : public ModelViolation {
public:
  using ModelViolation::ModelViolation;
};

class NonIntegralSurplus : public ModelViolation {
public:
  using ModelViolation::ModelViolation;
};

class NegativeSurplus : public ModelViolation {
public:
  using ModelViolation::ModelViolation;
};

class ZeroThroughputModel : public ModelViolation {
public:
  using ModelViolation::ModelViolation;
};

class KTooLarge : public Error {
public:
  using Error::Error;
};

class EncodingError : public Error {
public:
  using Error::Error;
};

class SolverTimeout : public Error {
public:
  using Error::Error;
};

class SolverProtocolError : public Error {
public:
  using Error::Error;
};

/// The solver answered "unknown".
class SolverUnknown : public Error {
public:
  using Error::Error;
};

class ScopeMismatch : public Error {
public:
  using Error::Error;
};

}  // namespace pmwb
