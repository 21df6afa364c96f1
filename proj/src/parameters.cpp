#include "vtank/parameters.hpp"

#include <cmath>

#include "vtank/error.hpp"

namespace vtank {
namespace {

void require(bool ok, const char* field, const char* rule) {
  if (!ok) fail(Errc::Validation, std::string(field) + ": " + rule);
}

}  // namespace

void check_parameters(const PhysicalParameters& p) {
  for (double v : {p.mass, p.velocity, p.water_temperature, p.water_z, p.wave_height, p.trim_angle}) {
    if (!std::isfinite(v)) fail(Errc::Validation, "physical parameters must be finite");
  }
  require(is_finite(p.cog), "cog", "must be finite");
  require(is_finite(p.inertia_diag), "inertia", "must be finite");
  require(p.mass > 0.0, "mass", "must be > 0");
  require(p.velocity >= 0.0, "velocity", "must be >= 0");
  require(p.inertia_diag.x > 0.0, "inertia.Ixx", "must be > 0");
  require(p.inertia_diag.y > 0.0, "inertia.Iyy", "must be > 0");
  require(p.inertia_diag.z > 0.0, "inertia.Izz", "must be > 0");
  require(p.water_temperature > 0.0 && p.water_temperature < 100.0, "water_temperature",
          "must be in (0, 100) degrees Celsius");
  require(p.wave_height >= 0.0, "wave_height", "must be >= 0");
}

const char* to_string(ScalarParameter p) noexcept {
  switch (p) {
    case ScalarParameter::Velocity: return "velocity";
    case ScalarParameter::Mass: return "mass";
    case ScalarParameter::TrimAngle: return "trim_angle";
    case ScalarParameter::WaterZ: return "water_z";
    case ScalarParameter::WaterTemperature: return "water_temperature";
  }
  return "?";
}

ScalarParameter scalar_parameter_from_string(const std::string& name) {
  for (auto p : {ScalarParameter::Velocity, ScalarParameter::Mass, ScalarParameter::TrimAngle,
                 ScalarParameter::WaterZ, ScalarParameter::WaterTemperature}) {
    if (name == to_string(p)) return p;
  }
  fail(Errc::Validation, "parameter '" + name + "' cannot be swept");
}

double get(const PhysicalParameters& p, ScalarParameter which) {
  switch (which) {
    case ScalarParameter::Velocity: return p.velocity;
    case ScalarParameter::Mass: return p.mass;
    case ScalarParameter::TrimAngle: return p.trim_angle;
    case ScalarParameter::WaterZ: return p.water_z;
    case ScalarParameter::WaterTemperature: return p.water_temperature;
  }
  return 0.0;
}

void set(PhysicalParameters& p, ScalarParameter which, double value) {
  switch (which) {
    case ScalarParameter::Velocity: p.velocity = value; break;
    case ScalarParameter::Mass: p.mass = value; break;
    case ScalarParameter::TrimAngle: p.trim_angle = value; break;
    case ScalarParameter::WaterZ: p.water_z = value; break;
    case ScalarParameter::WaterTemperature: p.water_temperature = value; break;
  }
}

void to_json(nlohmann::json& j, const Vec3& v) { j = nlohmann::json::array({v.x, v.y, v.z}); }

void from_json(const nlohmann::json& j, Vec3& v) {
  if (!j.is_array() || j.size() != 3) fail(Errc::Validation, "expected [x, y, z]");
  v = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

void to_json(nlohmann::json& j, const PhysicalParameters& p) {
  j = nlohmann::json{{"mass", p.mass},
                     {"cog", p.cog},
                     {"velocity", p.velocity},
                     {"water_temperature", p.water_temperature},
                     {"inertia", p.inertia_diag},
                     {"water_z", p.water_z},
                     {"wave_height", p.wave_height},
                     {"trim_angle", p.trim_angle}};
}

void from_json(const nlohmann::json& j, PhysicalParameters& p) {
  try {
    p.mass = j.at("mass").get<double>();
    p.cog = j.at("cog").get<Vec3>();
    p.velocity = j.at("velocity").get<double>();
    p.water_temperature = j.at("water_temperature").get<double>();
    p.inertia_diag = j.at("inertia").get<Vec3>();
    p.water_z = j.at("water_z").get<double>();
    p.wave_height = j.value("wave_height", 0.0);
    p.trim_angle = j.value("trim_angle", 0.0);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::Validation, std::string("physics parameters: ") + e.what());
  }
}

}  // namespace vtank
