#pragma once

#include <stdexcept>
#include <string>

namespace c2st {

// Mirrors c2st_status in c2st.h; values are part of the C ABI.
enum class ErrorCode : int {
  kInvalidInput = 1,
  kSingularity = 2,
  kEvaluation = 3,
  kDegenerateWitness = 4,
  kTrainingDiverged = 5,
  kIo = 6,
  kFormat = 7,
  kAtlasConstruction = 8,
  kFitting = 9,
  kZeroBandwidth = 10,
  kSchema = 11,
  kInternal = 12,
  kMagicMismatch = 13,
  kTruncated = 14,
  kCountMismatch = 15,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Thrown by nn::train with the offending epoch.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, const std::string& what)
      : Error(ErrorCode::kTrainingDiverged, what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::kInvalidInput, what);
}

}  // namespace c2st
