#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hgrag {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken structural invariant (dangling reference, conflicting ids, ...).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// No structured block could be recovered from a model response.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, int status)
      : Error(what), status_(status) {}
  /// HTTP status of the last attempt; 0 for transport failures.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

/// Store files could not be read back; names the file and byte offset.
class LoadError : public StorageError {
 public:
  LoadError(const std::string& file, std::uint64_t offset, const std::string& why)
      : StorageError(file + " at offset " + std::to_string(offset) + ": " + why),
        file_(file),
        offset_(offset) {}
  const std::string& file() const noexcept { return file_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string file_;
  std::uint64_t offset_;
};

class ReportError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hgrag
