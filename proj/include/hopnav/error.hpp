#pragma once

#include <stdexcept>
#include <string>

namespace hopnav {

enum class ErrorCode {
  InvalidArgument,
  // dynamics
  NoTouchdown,
  LegCollapse,
  GroundPenetration,
  InterstitialMissed,
  // controller
  ExhaustedSampling,
  Diverged,
  // gp
  SingularKernel,
  // abstraction
  NonTiling,
  // automata
  ParseError,
  NondeterministicTransition,
  UnknownStateReference,
  AlphabetMismatch,
  // synthesis
  NonConvergence,
  InitialStateViolating,
  NoEligibleAction,
  SatisfactionUnreachable,
  // harness
  ConfigError,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hopnav
