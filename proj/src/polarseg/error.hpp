#pragma once

#include <stdexcept>
#include <string>

namespace polarseg {

enum class ErrorCode {
  EmptyMask,
  DimensionMismatch,
  StrideInvalid,
  ShapeMismatch,
  NonPositiveRadius,
  ConfigInvalid,
  Divergence,
  Io,
  CheckpointMismatch,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

// All recoverable failures of the core library are reported with this type;
// the C API maps `code()` onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace polarseg
