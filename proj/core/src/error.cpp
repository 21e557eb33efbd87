#include "tensegrity/error.hpp"

namespace tensegrity {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Slip: return "slip";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::InvalidCommand: return "invalid-command";
    case ErrorKind::DegenerateSupport: return "degenerate-support";
    case ErrorKind::InvalidPolicy: return "invalid-policy";
    case ErrorKind::NoStepAvailable: return "no-step-available";
    case ErrorKind::Config: return "config";
    case ErrorKind::Protocol: return "protocol";
  }
  return "unknown";
}

}  // namespace tensegrity
