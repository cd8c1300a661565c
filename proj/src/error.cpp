#include "flyhash/error.hpp"

namespace flyhash {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyCorpus: return "empty_corpus";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIdOutOfRange: return "id_out_of_range";
    case ErrorCode::kLengthMismatch: return "length_mismatch";
    case ErrorCode::kDegenerateUnit: return "degenerate_unit";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kUndefined: return "undefined";
    case ErrorCode::kNoScorable: return "no_scorable";
    case ErrorCode::kNothingToTrain: return "nothing_to_train";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kChecksumMismatch: return "checksum_mismatch";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace flyhash
