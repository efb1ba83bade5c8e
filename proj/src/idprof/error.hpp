#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace idprof {

enum class ErrorCode {
  InvalidArgument,
  CloudTooSmall,
  NonFiniteInput,
  BudgetTooSmall,
  AllPointsIdentical,
  ZeroFirstNeighbor,
  TooFewValid,
  DegenerateFit,
  InvalidSpec,
  DeltaOutOfRange,
  AngleOutOfRange,
  FractionOutOfRange,
  UnreadableImage,
  EmptyInput,
  BadMagic,
  TruncatedFile,
  NonFiniteValue,
  IoFailure,
  InconsistentRows,
  LayerMismatch,
  LayerOrder,
  TooFewLayers,
};

std::string_view to_string(ErrorCode code) noexcept;

// True for errors caused by the filesystem or file contents rather than by
// caller-supplied parameters.
bool is_io_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace idprof
