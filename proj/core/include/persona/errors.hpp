#pragma once

#include <stdexcept>
#include <string>

namespace persona {

// Error taxonomy mapped onto CLI exit codes: config=2, data=3, backend=4.
// Storage problems are treated as data errors for exit-code purposes.
enum class ErrorKind {
  Config,
  Data,
  Backend,
  Storage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};

struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

struct BackendError : Error {
  explicit BackendError(const std::string& m) : Error(ErrorKind::Backend, m) {}
};

struct StorageError : Error {
  explicit StorageError(const std::string& m) : Error(ErrorKind::Storage, m) {}
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Backend: return 4;
    case ErrorKind::Storage: return 3;
  }
  return 1;
}

}  // namespace persona
