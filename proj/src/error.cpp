#include "fragkill/error.hpp"

namespace fragkill {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::NegativePart: return "NegativePart";
    case Errc::SumExceedsOne: return "SumExceedsOne";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyMeasure: return "EmptyMeasure";
    case Errc::ForbiddenAtom: return "ForbiddenAtom";
    case Errc::NonPositiveWeight: return "NonPositiveWeight";
    case Errc::DomainError: return "DomainError";
    case Errc::BracketFailure: return "BracketFailure";
    case Errc::DriftTooSmall: return "DriftTooSmall";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::GridRange: return "GridRange";
    case Errc::InsufficientSurvivors: return "InsufficientSurvivors";
    case Errc::CapExceeded: return "CapExceeded";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fragkill
