#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rlpath {

// Process exit codes used by the CLI. Every library error maps onto one.
enum class ExitCode : int {
  ok = 0,
  config = 1,
  data = 2,
  transport = 3,
  training = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

// Malformed input bytes. `offset` is the 1-based byte position reported by
// the parser.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(ExitCode::data, what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ExitCode::data, what) {}
};

// Fewer than two hosts, or both hosts on the same switch.
class EndpointError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConnectivityError : public ValidationError {
 public:
  ConnectivityError(const std::string& what, std::string unreachable)
      : ValidationError(what), unreachable_(std::move(unreachable)) {}

  const std::string& unreachable_dpid() const noexcept { return unreachable_; }

 private:
  std::string unreachable_;
};

// A caller broke an operation's precondition (e.g. stepping along a non-edge).
class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CompileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error(ExitCode::transport, what) {}
};

// Controller answered, but not with a success status.
class ProtocolError : public Error {
 public:
  ProtocolError(int status, const std::string& body_snippet)
      : Error(ExitCode::transport,
              "controller returned HTTP " + std::to_string(status) + ": " + body_snippet),
        status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ExitCode::training, what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(ExitCode::training, what) {}
};

}  // namespace rlpath
