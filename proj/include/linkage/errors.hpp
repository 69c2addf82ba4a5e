#pragma once

#include <stdexcept>
#include <string>

namespace linkage {

enum class Errc {
  InvalidSpec,
  DimensionMismatch,
  DegenerateDirection,
  NoConvergence,
  NoFeasiblePoint,
  OffConstraint,
  NotACurve,
  StalledAtSingularity,
  EmptyChain,
  NotAligned,
  OutOfRange,
  UndefinedTheta,
  CoincidentEndpoints,
  MismatchedEffector,
  NotAPlatform,
  UnknownDemo,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegenerateDirection: return "DegenerateDirection";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NoFeasiblePoint: return "NoFeasiblePoint";
    case Errc::OffConstraint: return "OffConstraint";
    case Errc::NotACurve: return "NotACurve";
    case Errc::StalledAtSingularity: return "StalledAtSingularity";
    case Errc::EmptyChain: return "EmptyChain";
    case Errc::NotAligned: return "NotAligned";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::UndefinedTheta: return "UndefinedTheta";
    case Errc::CoincidentEndpoints: return "CoincidentEndpoints";
    case Errc::MismatchedEffector: return "MismatchedEffector";
    case Errc::NotAPlatform: return "NotAPlatform";
    case Errc::UnknownDemo: return "UnknownDemo";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace linkage
