#include "error.hpp"

namespace evoprune {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::truncated: return "truncated file";
    case ErrorCode::count_mismatch: return "count mismatch";
    case ErrorCode::version_mismatch: return "version mismatch";
    case ErrorCode::corrupt_length: return "corrupt length";
    case ErrorCode::inconsistent_masks: return "inconsistent masks";
    case ErrorCode::config: return "configuration error";
    case ErrorCode::parse: return "parse error";
  }
  return "unknown error";
}

}  // namespace evoprune
