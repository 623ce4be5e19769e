#include "partproto/errors.hpp"

namespace partproto {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kZeroNormVector: return "ZeroNormVector";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kMalformedArchive: return "MalformedArchive";
    case ErrorKind::kInvalidEpisode: return "InvalidEpisode";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kEmptyClassFeatures: return "EmptyClassFeatures";
    case ErrorKind::kStageMismatch: return "StageMismatch";
    case ErrorKind::kNonparametricMode: return "NonparametricMode";
    case ErrorKind::kInsufficientData: return "InsufficientData";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

bool is_io_error(ErrorKind kind) {
  return kind == ErrorKind::kIoError || kind == ErrorKind::kMalformedArchive;
}

}  // namespace partproto
