#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fragkill {

enum class Errc {
  NegativePart,
  SumExceedsOne,
  NonFinite,
  EmptyMeasure,
  ForbiddenAtom,
  NonPositiveWeight,
  DomainError,
  BracketFailure,
  DriftTooSmall,
  NoConvergence,
  GridRange,
  InsufficientSurvivors,
  CapExceeded,
  InvalidArgument,
  ConfigError,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above so the C
// boundary and the CLI can map it onto a stable status.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fragkill
