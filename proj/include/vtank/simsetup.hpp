#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vtank/fields.hpp"
#include "vtank/mesh.hpp"
#include "vtank/parameters.hpp"

namespace vtank::simsetup {

inline constexpr double kGravity = 9.80665;
inline constexpr double kFormFactor = 0.2;
inline constexpr int kTimeSamples = 200;
inline constexpr double kTrimLimitDeg = 15.0;

enum class DofMode { Captive0, Sink1, SinkTrim2 };

const char* to_string(DofMode m) noexcept;          // "CAPTIVE_0DOF", ...
DofMode dof_mode_from_string(const std::string& s);  // accepts names or "0"/"1"/"2"

struct FluidProperties {
  double rho = 0.0;  // kg/m^3
  double nu = 0.0;   // m^2/s
};

/// Fresh water, linear interpolation in a tabulated property set.
/// Throws Error(OutOfRange) outside (0, 100) degC.
FluidProperties fluid_properties(double celsius);

/// ITTC-1957 model-ship correlation line. Throws Error(Validation) when
/// Re is too small for the line to be defined (Re <= 1e3).
double friction_coefficient(double reynolds);

/// 0.5 rho v^2 S Cf (1 + k)
double total_resistance(double rho, double velocity, double wetted_area, double reynolds);

/// A hull mesh that passed the watertightness checks once.
class Hull {
 public:
  /// Throws Error(InvalidMesh).
  explicit Hull(mesh::TriangleMesh mesh);

  const mesh::TriangleMesh& mesh() const { return mesh_; }
  const mesh::BoundingBox& box() const { return box_; }
  double volume() const { return volume_; }

 private:
  mesh::TriangleMesh mesh_;
  mesh::BoundingBox box_;
  double volume_ = 0.0;
};

struct DerivedParameters {
  double lwl = 0.0;
  mesh::BoundingBox domain_box;
  double re = 0.0;
  double fr = 0.0;
  double rho = 0.0;
  double nu = 0.0;
  double wetted_area_init = 0.0;
  std::vector<std::string> warnings;  // e.g. DRY_HULL
};

DerivedParameters parametrize(const Hull& hull, const PhysicalParameters& params);

/// `name value` lines.
std::string format_derived(const DerivedParameters& d);

/// Pitch moment (about +y, through the placed CoG) of hydrostatic pressure
/// rho g (water_z - z) integrated over the wetted surface.
double hydrostatic_pitch_moment(const Hull& hull, double water_z, const mesh::Attitude& attitude, double rho);

EquilibriumState equilibrium_0dof(const PhysicalParameters& params);

/// Free sink at fixed trim params.trim_angle. `rho` overrides the
/// temperature-derived density when set. A warm start whose residual is
/// already within tolerance returns after one evaluation.
EquilibriumState equilibrium_1dof(const Hull& hull, const PhysicalParameters& params,
                                  std::optional<double> rho = std::nullopt,
                                  std::optional<double> initial_sink = std::nullopt);

EquilibriumState equilibrium_2dof(const Hull& hull, const PhysicalParameters& params,
                                  std::optional<double> rho = std::nullopt);

/// Runs equilibrium for `mode` and evaluates the analytic calm-water model
/// at the resulting attitude.
SolveOutput solve(const Hull& hull, const PhysicalParameters& params, DofMode mode);

}  // namespace vtank::simsetup
