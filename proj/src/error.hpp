#pragma once

#include <stdexcept>
#include <string>

namespace evoprune {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  io,
  bad_magic,
  truncated,
  count_mismatch,
  version_mismatch,
  corrupt_length,
  inconsistent_masks,
  config,
  parse,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; the code survives the C boundary.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace evoprune
