#pragma once

#include <stdexcept>
#include <string>

namespace causalkg {

// Error categories double as the CLI exit-code table.
enum class ErrorKind : int {
  kUsage = 1,
  kConfig = 2,
  kIo = 3,
  kRemote = 4,
  kData = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const { return kind_; }
  // Short machine-readable tag, e.g. "MissingColumn" or "HttpStatus".
  const std::string& code() const { return code_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error io_error(const std::string& message) { return Error(ErrorKind::kIo, "IoError", message); }
inline Error data_error(std::string code, const std::string& message) {
  return Error(ErrorKind::kData, std::move(code), message);
}
inline Error config_error(const std::string& field, const std::string& message) {
  return Error(ErrorKind::kConfig, "ConfigInvalid", field + ": " + message);
}

// Raised by remote clients; `status` is the HTTP status for kHttpStatus.
class RemoteError : public Error {
 public:
  enum class Reason { kTimeout, kHttpStatus, kUnparseableResponse };

  RemoteError(Reason reason, const std::string& message, int status = 0)
      : Error(ErrorKind::kRemote, reason_name(reason), message), reason_(reason), status_(status) {}

  Reason reason() const { return reason_; }
  int status() const { return status_; }

  static std::string reason_name(Reason r) {
    switch (r) {
      case Reason::kTimeout: return "Timeout";
      case Reason::kHttpStatus: return "HttpStatus";
      case Reason::kUnparseableResponse: return "UnparseableResponse";
    }
    return "Remote";
  }

 private:
  Reason reason_;
  int status_;
};

}  // namespace causalkg
