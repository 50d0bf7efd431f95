#pragma once

// Plain-text data files: UTF-8, comma separated, '#' comment/metadata lines.
//
//   scan    : "# key: value" metadata, then frequency_mhz,rate_hz[,rate_sigma_hz]
//   levels  : n,third_step_mhz[,energy_mhz][,sigma_mhz]   (energy may be left empty)
//   series  : one frequency_mhz per row; "# sample_period_s:" and "# reference_mhz:" metadata
//   budget  : label,sigma_mhz
//
// Writers emit shortest round-trip decimal forms, so parse(write(x)) == x.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rydberg/errors.hpp"
#include "rydberg/lineshape.hpp"
#include "rydberg/pipeline/energy.hpp"
#include "rydberg/ritz.hpp"
#include "rydberg/stability.hpp"

namespace rydberg::pipeline {

using Metadata = std::map<std::string, std::string>;

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Cursor {
  std::string source;
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source, line, what); }

  double number(std::string_view field, const char* name) const {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
      fail(std::string("malformed ") + name + " '" + std::string(field) + "'");
    if (!std::isfinite(v)) fail(std::string("non-finite ") + name);
    return v;
  }

  int integer(std::string_view field, const char* name) const {
    int v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
      fail(std::string("non-integer ") + name + " '" + std::string(field) + "'");
    return v;
  }
};

/// Feeds data lines to `row`, collecting "# key: value" metadata on the way.
template <typename Row>
inline Metadata scan_lines(std::istream& in, Cursor& cur, Row&& row) {
  Metadata meta;
  std::string raw;
  while (std::getline(in, raw)) {
    ++cur.line;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = trim(line.substr(1));
      const auto colon = body.find(':');
      if (colon != std::string_view::npos && colon > 0 &&
          body.substr(0, colon).find(' ') == std::string_view::npos)
        meta[std::string(body.substr(0, colon))] = std::string(trim(body.substr(colon + 1)));
      continue;
    }
    row(split(line));
  }
  return meta;
}

inline std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace detail

// ---- scans ----

struct ScanFile {
  lineshape::ScanTrace trace;
  Metadata metadata;
};

inline ScanFile parse_scan(std::istream& in, const std::string& source = "scan") {
  detail::Cursor cur{source};
  ScanFile out;
  std::vector<double> sigma;
  std::optional<std::size_t> columns;
  out.metadata = detail::scan_lines(in, cur, [&](const std::vector<std::string_view>& f) {
    if (f.size() != 2 && f.size() != 3) cur.fail("expected 2 or 3 comma-separated fields");
    if (columns && *columns != f.size()) cur.fail("inconsistent column count");
    columns = f.size();
    const double freq = cur.number(f[0], "frequency");
    const double rate = cur.number(f[1], "rate");
    if (rate < 0) cur.fail("negative rate");
    if (!out.trace.points.empty() && !(freq > out.trace.points.back().frequency))
      cur.fail("non-monotone frequency " + std::string(f[0]) + " (row " +
               std::to_string(out.trace.points.size() + 1) + ")");
    out.trace.points.push_back({freq, rate});
    if (f.size() == 3) {
      const double s = cur.number(f[2], "rate uncertainty");
      if (!(s > 0)) cur.fail("rate uncertainty must be > 0");
      sigma.push_back(s);
    }
  });
  if (out.trace.points.empty()) throw ParseError(source, 0, "empty file: no scan rows");
  if (!sigma.empty()) out.trace.rate_sigma = std::move(sigma);
  return out;
}

inline ScanFile parse_scan(const std::filesystem::path& path) {
  auto in = detail::open(path);
  return parse_scan(in, path.string());
}

inline void write_scan(std::ostream& out, const lineshape::ScanTrace& trace, const Metadata& metadata = {}) {
  for (const auto& [key, value] : metadata) out << "# " << key << ": " << value << '\n';
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    out << format_number(trace.points[i].frequency) << ',' << format_number(trace.points[i].rate);
    if (trace.rate_sigma) out << ',' << format_number((*trace.rate_sigma)[i]);
    out << '\n';
  }
}

// ---- level tables ----

struct LevelFileOptions {
  /// Used for rows without an energy column.
  EnergyAssembly assembly;
  /// Used for rows without a sigma column.
  double default_sigma = 4.0;
};

inline std::vector<ritz::LevelRecord> parse_levels(std::istream& in, const LevelFileOptions& options,
                                                   const std::string& source = "levels") {
  detail::Cursor cur{source};
  std::vector<ritz::LevelRecord> out;
  std::set<int> seen;
  detail::scan_lines(in, cur, [&](const std::vector<std::string_view>& f) {
    if (f.size() < 2 || f.size() > 4) cur.fail("expected 2 to 4 comma-separated fields");
    ritz::LevelRecord rec;
    rec.n = cur.integer(f[0], "n");
    if (rec.n < 1) cur.fail("n must be >= 1");
    if (!seen.insert(rec.n).second) cur.fail("duplicate n = " + std::to_string(rec.n));
    rec.third_step = cur.number(f[1], "third-step frequency");
    if (f.size() >= 3 && !f[2].empty()) {
      rec.energy = cur.number(f[2], "energy");
    } else {
      EnergyAssembly a = options.assembly;
      a.third_step = *rec.third_step;
      rec.energy = assemble_energy(a);
    }
    rec.sigma = options.default_sigma;
    if (f.size() == 4) {
      rec.sigma = cur.number(f[3], "sigma");
      if (!(rec.sigma > 0)) cur.fail("sigma must be > 0");
    }
    out.push_back(rec);
  });
  if (out.empty()) throw ParseError(source, 0, "empty file: no level rows");
  return out;
}

inline std::vector<ritz::LevelRecord> parse_levels(const std::filesystem::path& path,
                                                   const LevelFileOptions& options) {
  auto in = detail::open(path);
  return parse_levels(in, options, path.string());
}

/// Rows without a stored third-step frequency get one derived from the assembly.
inline void write_levels(std::ostream& out, const std::vector<ritz::LevelRecord>& levels,
                         const EnergyAssembly& assembly, const Metadata& metadata = {}) {
  for (const auto& [key, value] : metadata) out << "# " << key << ": " << value << '\n';
  out << "# columns: n,third_step_mhz,energy_mhz,sigma_mhz\n";
  for (const auto& l : levels) {
    const double third =
        l.third_step ? *l.third_step : l.energy - assembly.reference_two_photon - assembly.centroid_offset;
    out << l.n << ',' << format_number(third) << ',' << format_number(l.energy) << ','
        << format_number(l.sigma) << '\n';
  }
}

// ---- frequency series ----

inline stability::FrequencySeries parse_series(std::istream& in, std::optional<double> sample_period,
                                               const std::string& source = "series") {
  detail::Cursor cur{source};
  stability::FrequencySeries out;
  const Metadata meta = detail::scan_lines(in, cur, [&](const std::vector<std::string_view>& f) {
    if (f.size() != 1) cur.fail("expected one frequency per row");
    out.samples.push_back(cur.number(f[0], "frequency"));
  });
  if (out.samples.empty()) throw ParseError(source, 0, "empty file: no samples");
  auto meta_number = [&](const char* key) -> std::optional<double> {
    const auto it = meta.find(key);
    if (it == meta.end()) return std::nullopt;
    detail::Cursor c{source};
    return c.number(it->second, key);
  };
  if (!sample_period) sample_period = meta_number("sample_period_s");
  if (!sample_period) throw ParseError(source, 0, "sample period not given (metadata 'sample_period_s')");
  out.sample_period = *sample_period;
  out.reference = meta_number("reference_mhz").value_or(0.0);
  try {
    out.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(source, 0, e.what());
  }
  return out;
}

inline stability::FrequencySeries parse_series(const std::filesystem::path& path,
                                               std::optional<double> sample_period = std::nullopt) {
  auto in = detail::open(path);
  return parse_series(in, sample_period, path.string());
}

inline void write_series(std::ostream& out, const stability::FrequencySeries& series) {
  out << "# sample_period_s: " << format_number(series.sample_period) << '\n';
  out << "# reference_mhz: " << format_number(series.reference) << '\n';
  for (double s : series.samples) out << format_number(s) << '\n';
}

// ---- error budgets ----

inline ErrorBudget parse_budget(std::istream& in, const std::string& source = "budget") {
  detail::Cursor cur{source};
  ErrorBudget out;
  std::set<std::string> labels;
  detail::scan_lines(in, cur, [&](const std::vector<std::string_view>& f) {
    if (f.size() != 2) cur.fail("expected label,sigma_mhz");
    if (f[0].empty()) cur.fail("empty label");
    const std::string label(f[0]);
    if (!labels.insert(label).second) cur.fail("duplicate label '" + label + "'");
    const double s = cur.number(f[1], "sigma");
    if (s < 0) cur.fail("sigma must be >= 0");
    out.contributions.push_back({label, s});
  });
  if (out.contributions.empty()) throw ParseError(source, 0, "empty file: no budget rows");
  return out;
}

inline ErrorBudget parse_budget(const std::filesystem::path& path) {
  auto in = detail::open(path);
  return parse_budget(in, path.string());
}

}  // namespace rydberg::pipeline
