#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ikh {

enum class ErrorCode {
  // track
  DiscontinuousChain,
  NonClosedLoop,
  EmptyTrack,
  InvalidTrack,
  SpawnOverflow,
  // sim
  SteppedAfterTermination,
  InvalidEnvConfig,
  // net
  DimMismatch,
  ShapeMismatch,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  // sac
  BufferTooSmall,
  NonFiniteLoss,
  // compose
  FrozenPolicyMutated,
  ManifestEmpty,
  // eval / cli
  NotComposable,
  AgentUnresolvable,
  UnknownTask,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ikh
