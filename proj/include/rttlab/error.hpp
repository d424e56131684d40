#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rttlab {

enum class ErrorKind {
  kParse,
  kValidation,
  kEmptyInput,
  kDegenerateInput,
  kArgument,
  kContractViolation,
  kNumeric,
  kGenerationDiverged,
  kLoad,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the whole library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const char* message) {
  if (!condition) fail(kind, message);
}

}  // namespace rttlab
