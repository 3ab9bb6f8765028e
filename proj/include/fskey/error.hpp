#pragma once

#include <stdexcept>
#include <string>

namespace fskey {

// The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  usage = 2,      // invalid argument or configuration
  data = 3,       // malformed input file or schema violation
  numerical = 4,  // non-PD matrix, degenerate data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace fskey
