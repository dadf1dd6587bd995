#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adfilt {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes do not conform (matmul, conv, elementwise ops, ...).
class ShapeError : public Error {
public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Mathematical domain violation (log of non-positive, bad filter band, ...).
class DomainError : public Error {
public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf surfaced from a numeric routine, or a singular system.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Malformed on-disk artifact. Carries the byte offset where parsing failed
// when it is known (offset == npos otherwise).
class FormatError : public Error {
public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  FormatError(const std::string& msg, std::size_t offset = npos)
      : Error(offset == npos ? msg : msg + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

// Invalid configuration value or combination.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Training diverged. Carries the epoch at which it happened.
class TrainError : public Error {
public:
  TrainError(const std::string& msg, int epoch)
      : Error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

private:
  int epoch_;
};

// Violated API contract (non-scalar backward root, bad argument, ...).
class ContractError : public Error {
public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

}  // namespace adfilt
