#include "c2st/error.hpp"

namespace c2st {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kSingularity: return "singularity";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kDegenerateWitness: return "degenerate_witness";
    case ErrorCode::kTrainingDiverged: return "training_diverged";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kAtlasConstruction: return "atlas_construction";
    case ErrorCode::kFitting: return "fitting";
    case ErrorCode::kZeroBandwidth: return "zero_bandwidth";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kInternal: return "internal";
    case ErrorCode::kMagicMismatch: return "magic_mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kCountMismatch: return "count_mismatch";
  }
  return "unknown";
}

}  // namespace c2st
