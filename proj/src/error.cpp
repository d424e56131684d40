#include "rttlab/error.hpp"

namespace rttlab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kContractViolation: return "contract violation";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kGenerationDiverged: return "generation diverged";
    case ErrorKind::kLoad: return "load error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

}  // namespace rttlab
