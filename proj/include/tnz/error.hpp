#pragma once

#include <stdexcept>
#include <string>

namespace tnz {

enum class ErrorCode {
  invalid_argument,
  shape_mismatch,
  label_collision,
  non_finite,
  factorization_failed,
  singular,
  bad_magic,
  unsupported_version,
  truncated,
  manifest_mismatch,
  io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above; the C
/// boundary maps them onto status values.
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

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace tnz
