#pragma once

#include <stdexcept>
#include <string>

namespace aerotrack {

// Exit / C-API codes. 1 is reserved for unexpected failures.
enum class ErrorCode : int {
  ok = 0,
  config = 2,
  io = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorCode::config, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorCode::io, msg) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(ErrorCode::numeric, msg) {}
};

}  // namespace aerotrack
