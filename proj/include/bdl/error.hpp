#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bdl {

enum class ErrorKind {
  kDegenerateVector,
  kShape,
  kEmptyInput,
  kInsufficientBatch,
  kProtocol,
  kConfig,
  kCache,
  kNumeric,
  kRange,
  kFormat,
  kVersion,
  kCheckpoint,
  kAlignment,
  kScheduleExhausted,
  kSampling,
  kStage,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the CLI
/// exit-code mapping) can dispatch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace bdl
