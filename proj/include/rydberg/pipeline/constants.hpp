#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "rydberg/errors.hpp"
#include "rydberg/ritz.hpp"

namespace rydberg::pipeline {

inline constexpr const char* kToolVersion = "1.0.0";

/// Physical constants and pipeline defaults. Loaded from one versioned JSON
/// file and echoed into every report.
struct Constants {
  std::string version = "builtin-1";
  double rydberg_wavenumber_per_m = 10973660.672249;
  double speed_of_light_m_per_s = 299792458.0;
  /// 5S1/2 -> 5D5/2 two-photon frequency used to assemble level energies.
  double reference_two_photon_mhz = 770570285.0;
  /// Independent two-photon value the reference is cross-checked against.
  double independent_two_photon_mhz = 770570284.734;
  double centroid_offset_mhz = 1263.0;
  double default_level_sigma_mhz = 4.0;
  double dark_rate_floor_hz = 0.3;

  double rydberg_mhz() const {
    if (!(rydberg_wavenumber_per_m > 0) || !(speed_of_light_m_per_s > 0))
      throw InvalidArgument("Rydberg wavenumber and speed of light must be > 0");
    return rydberg_wavenumber_per_m * speed_of_light_m_per_s * 1e-6;
  }
};

inline nlohmann::json to_json(const Constants& c) {
  return {{"version", c.version},
          {"rydberg_wavenumber_per_m", c.rydberg_wavenumber_per_m},
          {"speed_of_light_m_per_s", c.speed_of_light_m_per_s},
          {"reference_two_photon_mhz", c.reference_two_photon_mhz},
          {"independent_two_photon_mhz", c.independent_two_photon_mhz},
          {"centroid_offset_mhz", c.centroid_offset_mhz},
          {"default_level_sigma_mhz", c.default_level_sigma_mhz},
          {"dark_rate_floor_hz", c.dark_rate_floor_hz}};
}

/// Keys absent from the document keep their built-in values; unknown keys are errors.
inline Constants constants_from_json(const nlohmann::json& doc, const std::string& source = "constants") {
  if (!doc.is_object()) throw ParseError(source, 0, "constants must be a JSON object");
  Constants c;
  for (const auto& [key, value] : doc.items()) {
    auto number = [&]() {
      if (!value.is_number()) throw ParseError(source, 0, "'" + key + "' must be a number");
      return value.get<double>();
    };
    if (key == "version") {
      if (!value.is_string()) throw ParseError(source, 0, "'version' must be a string");
      c.version = value.get<std::string>();
    } else if (key == "rydberg_wavenumber_per_m") c.rydberg_wavenumber_per_m = number();
    else if (key == "speed_of_light_m_per_s") c.speed_of_light_m_per_s = number();
    else if (key == "reference_two_photon_mhz") c.reference_two_photon_mhz = number();
    else if (key == "independent_two_photon_mhz") c.independent_two_photon_mhz = number();
    else if (key == "centroid_offset_mhz") c.centroid_offset_mhz = number();
    else if (key == "default_level_sigma_mhz") c.default_level_sigma_mhz = number();
    else if (key == "dark_rate_floor_hz") c.dark_rate_floor_hz = number();
    else throw ParseError(source, 0, "unknown constants key '" + key + "'");
  }
  if (!(c.default_level_sigma_mhz > 0)) throw ParseError(source, 0, "default_level_sigma_mhz must be > 0");
  (void)c.rydberg_mhz();
  return c;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
}

inline Constants load_constants(const std::filesystem::path& path) {
  return constants_from_json(read_json_file(path), path.string());
}

}  // namespace rydberg::pipeline
