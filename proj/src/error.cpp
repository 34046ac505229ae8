#include "hopnav/error.hpp"

namespace hopnav {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoTouchdown: return "NoTouchdown";
    case ErrorCode::LegCollapse: return "LegCollapse";
    case ErrorCode::GroundPenetration: return "GroundPenetration";
    case ErrorCode::InterstitialMissed: return "InterstitialMissed";
    case ErrorCode::ExhaustedSampling: return "ExhaustedSampling";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::SingularKernel: return "SingularKernel";
    case ErrorCode::NonTiling: return "NonTiling";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NondeterministicTransition: return "NondeterministicTransition";
    case ErrorCode::UnknownStateReference: return "UnknownStateReference";
    case ErrorCode::AlphabetMismatch: return "AlphabetMismatch";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::InitialStateViolating: return "InitialStateViolating";
    case ErrorCode::NoEligibleAction: return "NoEligibleAction";
    case ErrorCode::SatisfactionUnreachable: return "SatisfactionUnreachable";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace hopnav
