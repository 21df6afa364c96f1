#pragma once

#include <string>

#include <json.hpp>

#include "vtank/vec3.hpp"

namespace vtank {

/// Designer-facing physical inputs of one run, SI units (trim in degrees,
/// temperature in Celsius).
struct PhysicalParameters {
  double mass = 0.0;
  Vec3 cog;
  double velocity = 0.0;
  double water_temperature = 15.0;
  Vec3 inertia_diag{1.0, 1.0, 1.0};  // stored and forwarded, unused by steady solves
  double water_z = 0.0;
  double wave_height = 0.0;
  double trim_angle = 0.0;

  friend bool operator==(const PhysicalParameters&, const PhysicalParameters&) = default;
};

/// Throws Error(Validation) naming the first offending field.
void check_parameters(const PhysicalParameters& p);

/// Scalar fields a range run may sweep.
enum class ScalarParameter { Velocity, Mass, TrimAngle, WaterZ, WaterTemperature };

const char* to_string(ScalarParameter p) noexcept;
ScalarParameter scalar_parameter_from_string(const std::string& name);  // Error(Validation)
double get(const PhysicalParameters& p, ScalarParameter which);
void set(PhysicalParameters& p, ScalarParameter which, double value);

void to_json(nlohmann::json& j, const Vec3& v);
void from_json(const nlohmann::json& j, Vec3& v);
void to_json(nlohmann::json& j, const PhysicalParameters& p);
void from_json(const nlohmann::json& j, PhysicalParameters& p);

}  // namespace vtank
