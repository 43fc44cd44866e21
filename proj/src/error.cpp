#include "ikh/error.hpp"

namespace ikh {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DiscontinuousChain: return "DiscontinuousChain";
    case ErrorCode::NonClosedLoop: return "NonClosedLoop";
    case ErrorCode::EmptyTrack: return "EmptyTrack";
    case ErrorCode::InvalidTrack: return "InvalidTrack";
    case ErrorCode::SpawnOverflow: return "SpawnOverflow";
    case ErrorCode::SteppedAfterTermination: return "SteppedAfterTermination";
    case ErrorCode::InvalidEnvConfig: return "InvalidEnvConfig";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::BufferTooSmall: return "BufferTooSmall";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::FrozenPolicyMutated: return "FrozenPolicyMutated";
    case ErrorCode::ManifestEmpty: return "ManifestEmpty";
    case ErrorCode::NotComposable: return "NotComposable";
    case ErrorCode::AgentUnresolvable: return "AgentUnresolvable";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ikh
