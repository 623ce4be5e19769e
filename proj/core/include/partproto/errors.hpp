#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace partproto {

enum class ErrorKind {
  kInvalidArgument,
  kZeroNormVector,
  kDimensionMismatch,
  kIoError,
  kMalformedArchive,
  kInvalidEpisode,
  kEmptyInput,
  kEmptyClassFeatures,
  kStageMismatch,
  kNonparametricMode,
  kInsufficientData,
  kInvalidConfig,
};

/// Stable name of an error kind, e.g. "MalformedArchive".
std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// True for failures caused by the filesystem or archive contents rather
/// than by caller-supplied values.
bool is_io_error(ErrorKind kind);

}  // namespace partproto
