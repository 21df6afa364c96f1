#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vtank {

enum class Errc {
  MalformedFile,
  UnsupportedFeature,
  EmptyMesh,
  InvalidMesh,
  NotAuthorized,
  Unauthenticated,
  NotFound,
  DuplicateName,
  GeometryNotValid,
  Validation,
  Conflict,
  UnknownCoordinate,
  UnsupportedScheduler,
  Unreachable,
  OutOfRange,
  InsufficientBuoyancy,
  NoConvergence,
  TrimRangeExceeded,
  InconsistentResults,
  MissingArtifact,
  Integrity,
  IncompleteFamily,
  EmptyText,
  UnknownSimulation,
  Io,
};

const char* to_string(Errc code) noexcept;
/// Inverse of to_string.
std::optional<Errc> errc_from_string(std::string_view name) noexcept;

/// Domain error carrying a stable code. Every module throws this type;
/// the api layer maps codes to HTTP statuses and the cli to exit codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace vtank
