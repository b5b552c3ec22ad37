#include "ringshift/error.hpp"

namespace ringshift {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::NonPeriodic: return "NonPeriodic";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::PerimeterOverflow: return "PerimeterOverflow";
    case ErrorCode::NotDivisible: return "NotDivisible";
    case ErrorCode::PerimeterMismatch: return "PerimeterMismatch";
    case ErrorCode::LoopDetected: return "LoopDetected";
    case ErrorCode::ProfileMissing: return "ProfileMissing";
    case ErrorCode::AllCandidatesCyclic: return "AllCandidatesCyclic";
    case ErrorCode::InsufficientCapacity: return "InsufficientCapacity";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

bool is_validation_error(ErrorCode code) {
  return code != ErrorCode::Internal;
}

}  // namespace ringshift
