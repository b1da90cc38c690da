#include "bdl/error.hpp"

namespace bdl {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDegenerateVector: return "degenerate-vector error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kEmptyInput: return "empty-input error";
    case ErrorKind::kInsufficientBatch: return "insufficient-batch error";
    case ErrorKind::kProtocol: return "protocol error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kCache: return "cache error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kVersion: return "version error";
    case ErrorKind::kCheckpoint: return "checkpoint error";
    case ErrorKind::kAlignment: return "alignment error";
    case ErrorKind::kScheduleExhausted: return "schedule-exhausted error";
    case ErrorKind::kSampling: return "sampling error";
    case ErrorKind::kStage: return "stage error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

}  // namespace bdl
