#include "voiceloop/error.hpp"

namespace voiceloop {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InsufficientVariance: return "InsufficientVariance";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidFeatures: return "InvalidFeatures";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::EmptySpectrogram: return "EmptySpectrogram";
    case ErrorCode::InvalidF0: return "InvalidF0";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SessionNotActive: return "SessionNotActive";
    case ErrorCode::InvalidOffset: return "InvalidOffset";
    case ErrorCode::TooFewTracks: return "TooFewTracks";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::StaleCandidate: return "StaleCandidate";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace voiceloop
