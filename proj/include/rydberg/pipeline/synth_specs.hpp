#pragma once

// JSON forms of the synthetic-data specs used by the synth-series and
// synth-scan commands.

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "rydberg/errors.hpp"
#include "rydberg/synth.hpp"

namespace rydberg::pipeline {

namespace detail {

class SpecReader {
 public:
  SpecReader(const nlohmann::json& doc, std::string source) : doc_(doc), source_(std::move(source)) {
    if (!doc_.is_object()) throw ParseError(source_, 0, "spec must be a JSON object");
  }

  double number(const char* key, std::optional<double> fallback = std::nullopt) {
    used_.insert(key);
    if (!doc_.contains(key)) {
      if (fallback) return *fallback;
      throw ParseError(source_, 0, std::string("missing '") + key + "'");
    }
    if (!doc_[key].is_number()) throw ParseError(source_, 0, std::string("'") + key + "' must be a number");
    return doc_[key].get<double>();
  }

  std::uint64_t seed() {
    used_.insert("seed");
    if (!doc_.contains("seed")) return 0;
    if (!doc_["seed"].is_number_unsigned()) throw ParseError(source_, 0, "'seed' must be a non-negative integer");
    return doc_["seed"].get<std::uint64_t>();
  }

  const nlohmann::json& raw(const char* key) {
    used_.insert(key);
    return doc_[key];
  }
  bool has(const char* key) const { return doc_.contains(key); }

  void finish() const {
    for (const auto& [key, _] : doc_.items())
      if (!used_.count(key)) throw ParseError(source_, 0, "unknown key '" + key + "'");
  }
  const std::string& source() const { return source_; }

 private:
  const nlohmann::json& doc_;
  std::string source_;
  std::set<std::string> used_;
};

}  // namespace detail

inline synth::SeriesSpec series_spec_from_json(const nlohmann::json& doc, double rydberg,
                                               const std::string& source = "spec") {
  detail::SpecReader r(doc, source);
  synth::SeriesSpec s;
  s.rydberg = rydberg;
  s.ionization_energy = r.number("ionization_energy_mhz");
  s.n_min = static_cast<int>(r.number("n_min", 36));
  s.n_max = static_cast<int>(r.number("n_max", 63));
  s.noise_sigma = r.number("noise_sigma_mhz", 0.0);
  s.nominal_sigma = r.number("nominal_sigma_mhz", 1.0);
  s.seed = r.seed();
  if (!r.has("coefficients")) throw ParseError(source, 0, "missing 'coefficients'");
  const auto& c = r.raw("coefficients");
  if (!c.is_object()) throw ParseError(source, 0, "'coefficients' must be an object");
  detail::SpecReader cr(c, source + ":coefficients");
  s.coefficients.delta0 = cr.number("delta0");
  s.coefficients.delta2 = cr.number("delta2", 0.0);
  s.coefficients.delta4 = cr.number("delta4", 0.0);
  s.coefficients.delta6 = cr.number("delta6", 0.0);
  cr.finish();
  int terms = 4;
  while (terms > 1 && s.coefficients[terms - 1] == 0.0) --terms;
  s.coefficients.term_count = static_cast<int>(r.number("term_count", terms));
  if (r.has("convention")) {
    const auto& conv = r.raw("convention");
    if (conv == "implicit")
      s.convention = ritz::Convention::implicit;
    else if (conv == "explicit")
      s.convention = ritz::Convention::explicit_delta0;
    else
      throw ParseError(source, 0, "'convention' must be \"implicit\" or \"explicit\"");
  }
  r.finish();
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, e.what());
  }
  return s;
}

inline synth::ScanSpec scan_spec_from_json(const nlohmann::json& doc, const std::string& source = "spec") {
  detail::SpecReader r(doc, source);
  synth::ScanSpec s;
  s.line.center = r.number("center_mhz");
  s.line.fwhm = r.number("fwhm_mhz");
  s.line.amplitude = r.number("amplitude_hz");
  s.line.baseline = r.number("baseline_hz", 0.0);
  s.start = r.number("start_mhz");
  s.stop = r.number("stop_mhz");
  s.step = r.number("step_mhz");
  s.dwell = r.number("dwell_s", 1.0);
  s.dark_rate = r.number("dark_rate_hz", 0.0);
  s.seed = r.seed();
  if (r.has("expectation")) {
    const auto& e = r.raw("expectation");
    if (!e.is_boolean()) throw ParseError(source, 0, "'expectation' must be a boolean");
    s.expectation = e.get<bool>();
  }
  r.finish();
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, e.what());
  }
  return s;
}

}  // namespace rydberg::pipeline
