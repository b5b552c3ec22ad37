#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ringshift {

enum class ErrorCode {
  EmptySeries,
  NonPeriodic,
  InvalidInput,
  PerimeterOverflow,
  NotDivisible,
  PerimeterMismatch,
  LoopDetected,
  ProfileMissing,
  AllCandidatesCyclic,
  InsufficientCapacity,
  Disconnected,
  SchemaViolation,
  UnknownCommand,
  Internal,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by bad caller input (CLI exit code 2).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ringshift
