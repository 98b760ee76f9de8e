#pragma once

#include <stdexcept>
#include <string>

namespace lwir {

/// Base of every error thrown by the library. `code()` is the status the
/// C API and the CLI report for it.
class Error : public std::runtime_error {
 public:
  Error(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

// Codes 2/3/4 double as CLI exit codes.
inline constexpr int kConfigErrorCode = 2;
inline constexpr int kDataErrorCode = 3;
inline constexpr int kNumericalErrorCode = 4;
inline constexpr int kDomainErrorCode = 5;
inline constexpr int kIoErrorCode = 6;

/// Invalid configuration key or value.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(kConfigErrorCode, what) {}
};

/// Malformed, incompatible or incomplete data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(kDataErrorCode, what) {}
};

/// File format violation (bad magic, truncation, version or hash mismatch).
class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& what) : DataError(what) {}
};

/// A field-like record was asked for a component it does not carry.
class WithheldComponentError : public DataError {
 public:
  explicit WithheldComponentError(const std::string& what) : DataError(what) {}
};

/// Non-finite values or a degenerate numerical problem.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(kNumericalErrorCode, what) {}
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(kDomainErrorCode, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(kIoErrorCode, what) {}
};

}  // namespace lwir
