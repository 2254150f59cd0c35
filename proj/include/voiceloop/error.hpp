#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voiceloop {

enum class ErrorCode {
  DimensionMismatch,
  InsufficientVariance,
  TooFewSamples,
  InvalidK,
  InvalidFeatures,
  ZeroVariance,
  EmptySpectrogram,
  InvalidF0,
  InvalidConfig,
  InvalidArgument,
  SessionNotActive,
  InvalidOffset,
  TooFewTracks,
  UnknownSession,
  UnknownTarget,
  StaleCandidate,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP status mapping) can dispatch without parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace voiceloop
