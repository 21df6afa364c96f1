#include "vtank/error.hpp"

namespace vtank {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedFile: return "MALFORMED_FILE";
    case Errc::UnsupportedFeature: return "UNSUPPORTED_FEATURE";
    case Errc::EmptyMesh: return "EMPTY_MESH";
    case Errc::InvalidMesh: return "INVALID_MESH";
    case Errc::NotAuthorized: return "NOT_AUTHORIZED";
    case Errc::Unauthenticated: return "UNAUTHENTICATED";
    case Errc::NotFound: return "NOT_FOUND";
    case Errc::DuplicateName: return "DUPLICATE_NAME";
    case Errc::GeometryNotValid: return "GEOMETRY_NOT_VALID";
    case Errc::Validation: return "VALIDATION";
    case Errc::Conflict: return "CONFLICT";
    case Errc::UnknownCoordinate: return "UNKNOWN_COORDINATE";
    case Errc::UnsupportedScheduler: return "UNSUPPORTED_SCHEDULER";
    case Errc::Unreachable: return "UNREACHABLE";
    case Errc::OutOfRange: return "OUT_OF_RANGE";
    case Errc::InsufficientBuoyancy: return "INSUFFICIENT_BUOYANCY";
    case Errc::NoConvergence: return "NO_CONVERGENCE";
    case Errc::TrimRangeExceeded: return "TRIM_RANGE_EXCEEDED";
    case Errc::InconsistentResults: return "INCONSISTENT_RESULTS";
    case Errc::MissingArtifact: return "MISSING_ARTIFACT";
    case Errc::Integrity: return "INTEGRITY";
    case Errc::IncompleteFamily: return "INCOMPLETE_FAMILY";
    case Errc::EmptyText: return "EMPTY_TEXT";
    case Errc::UnknownSimulation: return "UNKNOWN_SIMULATION";
    case Errc::Io: return "IO";
  }
  return "UNKNOWN";
}

std::optional<Errc> errc_from_string(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(Errc::Io); ++i) {
    if (name == to_string(static_cast<Errc>(i))) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

}  // namespace vtank
