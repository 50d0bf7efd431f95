#pragma once

// Batch analysis driven by a JSON config. Inputs are checked up front; after
// that every item runs independently and failures are collected, not fatal.
//
// {
//   "constants": "constants.json",          optional, relative to the config
//   "output_directory": "out",              optional, default "report"
//   "levels": [{"path": "...", "methods": [1, 2, 3], "weighted": false,
//               "term_count": 4, "ionization_energy_mhz": 1010024700}],
//   "scans":  [{"path": "..."}],
//   "series": [{"path": "...", "sample_period_s": 1.0}],
//   "budget": "budget.csv"
// }

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rydberg/errors.hpp"
#include "rydberg/lineshape.hpp"
#include "rydberg/pipeline/constants.hpp"
#include "rydberg/pipeline/energy.hpp"
#include "rydberg/pipeline/io.hpp"
#include "rydberg/pipeline/report.hpp"
#include "rydberg/ritz.hpp"
#include "rydberg/stability.hpp"

namespace rydberg::pipeline {

namespace fs = std::filesystem;

struct LevelJob {
  fs::path path;
  std::vector<int> methods{3};
  bool weighted = false;
  int term_count = 4;
  std::optional<double> ionization_energy;
};

struct SeriesJob {
  fs::path path;
  std::optional<double> sample_period;
};

struct AnalysisConfig {
  fs::path source;
  std::optional<fs::path> constants;
  fs::path output_directory = "report";
  std::vector<LevelJob> levels;
  std::vector<fs::path> scans;
  std::vector<SeriesJob> series;
  std::optional<fs::path> budget;

  std::vector<fs::path> inputs() const {
    std::vector<fs::path> out;
    if (constants) out.push_back(*constants);
    for (const auto& l : levels) out.push_back(l.path);
    for (const auto& s : scans) out.push_back(s);
    for (const auto& s : series) out.push_back(s.path);
    if (budget) out.push_back(*budget);
    return out;
  }
};

namespace detail {

inline void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where,
                      const std::string& source) {
  if (!obj.is_object()) throw ParseError(source, 0, where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
      throw ParseError(source, 0, "unknown key '" + key + "' in " + where);
}

inline fs::path path_field(const json& v, const fs::path& base, const std::string& where, const std::string& source) {
  if (!v.is_string() || v.get<std::string>().empty())
    throw ParseError(source, 0, where + " must be a non-empty string path");
  const fs::path p = v.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

}  // namespace detail

/// Schema check and path resolution. Does not touch the input files.
inline AnalysisConfig parse_config(const json& doc, const fs::path& source) {
  const std::string src = source.string();
  const fs::path base = source.has_parent_path() ? source.parent_path() : fs::path(".");
  detail::only_keys(doc, {"constants", "output_directory", "levels", "scans", "series", "budget"}, "config", src);
  AnalysisConfig cfg;
  cfg.source = source;
  if (doc.contains("constants")) cfg.constants = detail::path_field(doc["constants"], base, "constants", src);
  if (doc.contains("output_directory"))
    cfg.output_directory = detail::path_field(doc["output_directory"], base, "output_directory", src);
  else
    cfg.output_directory = base / "report";

  auto array = [&](const char* key) -> const json& {
    const json& a = doc[key];
    if (!a.is_array()) throw ParseError(src, 0, std::string(key) + " must be an array");
    return a;
  };
  if (doc.contains("levels")) {
    for (const auto& item : array("levels")) {
      detail::only_keys(item, {"path", "methods", "weighted", "term_count", "ionization_energy_mhz"}, "levels entry", src);
      if (!item.contains("path")) throw ParseError(src, 0, "levels entry needs a path");
      LevelJob job;
      job.path = detail::path_field(item["path"], base, "levels.path", src);
      if (item.contains("methods")) {
        if (!item["methods"].is_array() || item["methods"].empty())
          throw ParseError(src, 0, "levels.methods must be a non-empty array");
        job.methods.clear();
        for (const auto& m : item["methods"]) {
          if (!m.is_number_integer() || m.get<int>() < 1 || m.get<int>() > 3)
            throw ParseError(src, 0, "levels.methods entries must be 1, 2 or 3");
          job.methods.push_back(m.get<int>());
        }
      }
      if (item.contains("weighted")) {
        if (!item["weighted"].is_boolean()) throw ParseError(src, 0, "levels.weighted must be a boolean");
        job.weighted = item["weighted"].get<bool>();
      }
      if (item.contains("term_count")) {
        const json& t = item["term_count"];
        if (!t.is_number_integer() || t.get<int>() < 1 || t.get<int>() > 4)
          throw ParseError(src, 0, "levels.term_count must be an integer in 1..4");
        job.term_count = t.get<int>();
      }
      if (item.contains("ionization_energy_mhz")) {
        if (!item["ionization_energy_mhz"].is_number())
          throw ParseError(src, 0, "levels.ionization_energy_mhz must be a number");
        job.ionization_energy = item["ionization_energy_mhz"].get<double>();
      }
      cfg.levels.push_back(std::move(job));
    }
  }
  if (doc.contains("scans")) {
    for (const auto& item : array("scans")) {
      if (item.is_string()) {
        cfg.scans.push_back(detail::path_field(item, base, "scans entry", src));
        continue;
      }
      detail::only_keys(item, {"path"}, "scans entry", src);
      if (!item.contains("path")) throw ParseError(src, 0, "scans entry needs a path");
      cfg.scans.push_back(detail::path_field(item["path"], base, "scans.path", src));
    }
  }
  if (doc.contains("series")) {
    for (const auto& item : array("series")) {
      detail::only_keys(item, {"path", "sample_period_s"}, "series entry", src);
      if (!item.contains("path")) throw ParseError(src, 0, "series entry needs a path");
      SeriesJob job;
      job.path = detail::path_field(item["path"], base, "series.path", src);
      if (item.contains("sample_period_s")) {
        if (!item["sample_period_s"].is_number() || !(item["sample_period_s"].get<double>() > 0))
          throw ParseError(src, 0, "series.sample_period_s must be a positive number");
        job.sample_period = item["sample_period_s"].get<double>();
      }
      cfg.series.push_back(std::move(job));
    }
  }
  if (doc.contains("budget")) cfg.budget = detail::path_field(doc["budget"], base, "budget", src);
  if (cfg.levels.empty() && cfg.scans.empty() && cfg.series.empty() && !cfg.budget)
    throw ParseError(src, 0, "config names no inputs");
  return cfg;
}

inline AnalysisConfig load_config(const fs::path& path) { return parse_config(read_json_file(path), path); }

// ---- report ----

struct InputDigest {
  std::string path;
  std::string sha256;
};

struct Provenance {
  std::string tool_version = kToolVersion;
  std::string config;
  Constants constants;
  std::vector<InputDigest> inputs;
};

struct ItemError {
  std::string message;
  ErrorClass error_class = ErrorClass::internal;
};

struct LineItem {
  std::string path;
  std::optional<lineshape::LineFitResult> fit;
  std::optional<ItemError> error;
};

struct SeriesFitItem {
  int method = 3;
  std::optional<ritz::SeriesFit> fit;
  std::optional<ItemError> error;
};

struct LevelItem {
  std::string path;
  std::vector<ritz::LevelRecord> levels;
  std::optional<double> defect_ionization;  ///< E_i used for the per-level defects
  std::vector<double> defects;
  std::vector<SeriesFitItem> fits;
  std::optional<ItemError> error;
};

struct AllanItem {
  std::string path;
  std::optional<stability::AllanCurve> curve;
  std::optional<ItemError> error;
};

struct BudgetItem {
  std::string path;
  ErrorBudget budget;
  double total = 0.0;
  std::optional<ItemError> error;
};

struct AnalysisReport {
  Provenance provenance;
  ReferenceCheck reference_check{};
  std::vector<LineItem> lines;
  std::vector<LevelItem> level_sets;
  std::vector<AllanItem> allan;
  std::optional<BudgetItem> budget;
  std::vector<fs::path> written;

  /// 0 ok, 1 input error, 2 fit failure or non-convergence, 3 internal error.
  int exit_status() const {
    int status = 0;
    auto note = [&](const std::optional<ItemError>& e) {
      if (!e) return;
      const int s = e->error_class == ErrorClass::input ? 1 : e->error_class == ErrorClass::fit ? 2 : 3;
      status = std::max(status, s);
    };
    for (const auto& l : lines) {
      note(l.error);
      if (l.fit && !l.fit->converged) status = std::max(status, 2);
    }
    for (const auto& s : level_sets) {
      note(s.error);
      for (const auto& f : s.fits) {
        note(f.error);
        if (f.fit && !f.fit->converged) status = std::max(status, 2);
      }
    }
    for (const auto& a : allan) note(a.error);
    if (budget) note(budget->error);
    if (!reference_check.consistent) status = std::max(status, 1);
    return status;
  }
};

namespace detail {

template <typename F>
inline std::optional<ItemError> capture(F&& f) {
  try {
    f();
    return std::nullopt;
  } catch (const Error& e) {
    return ItemError{e.what(), e.error_class()};
  } catch (const std::exception& e) {
    return ItemError{e.what(), ErrorClass::internal};
  }
}

inline json error_json(const std::optional<ItemError>& e) {
  if (!e) return nullptr;
  const char* cls = e->error_class == ErrorClass::input ? "input" : e->error_class == ErrorClass::fit ? "fit" : "internal";
  return {{"message", e->message}, {"class", cls}};
}

}  // namespace detail

inline json to_json(const AnalysisReport& r) {
  json doc;
  json inputs = json::array();
  for (const auto& d : r.provenance.inputs) inputs.push_back({{"path", d.path}, {"sha256", d.sha256}});
  doc["provenance"] = {{"tool_version", r.provenance.tool_version},
                       {"config", r.provenance.config},
                       {"constants", to_json(r.provenance.constants)},
                       {"inputs", inputs}};
  doc["reference_check"] = to_json(r.reference_check);
  json lines = json::array();
  for (const auto& l : r.lines)
    lines.push_back({{"path", l.path}, {"fit", l.fit ? to_json(*l.fit) : json(nullptr)}, {"error", detail::error_json(l.error)}});
  doc["line_fits"] = lines;
  json sets = json::array();
  for (const auto& s : r.level_sets) {
    json levels = json::array();
    for (std::size_t i = 0; i < s.levels.size(); ++i) {
      json lv = {{"n", s.levels[i].n}, {"energy_mhz", s.levels[i].energy}, {"sigma_mhz", s.levels[i].sigma}};
      if (s.levels[i].third_step) lv["third_step_mhz"] = *s.levels[i].third_step;
      if (i < s.defects.size()) lv["defect"] = s.defects[i];
      levels.push_back(lv);
    }
    json fits = json::array();
    for (const auto& f : s.fits)
      fits.push_back({{"method", f.method}, {"fit", f.fit ? to_json(*f.fit) : json(nullptr)}, {"error", detail::error_json(f.error)}});
    sets.push_back({{"path", s.path},
                    {"defect_ionization_energy_mhz", s.defect_ionization ? json(*s.defect_ionization) : json(nullptr)},
                    {"levels", levels},
                    {"series_fits", fits},
                    {"error", detail::error_json(s.error)}});
  }
  doc["level_sets"] = sets;
  json allan = json::array();
  for (const auto& a : r.allan)
    allan.push_back({{"path", a.path}, {"curve", a.curve ? to_json(*a.curve) : json(nullptr)}, {"error", detail::error_json(a.error)}});
  doc["allan"] = allan;
  doc["budget"] = r.budget ? json{{"path", r.budget->path},
                                  {"result", r.budget->error ? json(nullptr) : to_json(r.budget->budget, r.budget->total)},
                                  {"error", detail::error_json(r.budget->error)}}
                           : json(nullptr);
  doc["exit_status"] = r.exit_status();
  return doc;
}

inline std::string to_text(const AnalysisReport& r) {
  std::ostringstream os;
  os << "Rydberg series analysis report\n";
  os << "tool version " << r.provenance.tool_version << ", constants version " << r.provenance.constants.version << '\n';
  os << "config " << r.provenance.config << '\n';
  os << "R = " << fixed(r.provenance.constants.rydberg_wavenumber_per_m, 6) << " 1/m = "
     << fixed(r.provenance.constants.rydberg_mhz(), 4) << " MHz\n";
  for (const auto& d : r.provenance.inputs) os << "input " << d.path << "  sha256 " << d.sha256 << '\n';
  os << "\nReference cross-check: " << fixed(r.reference_check.reference, 3) << " vs "
     << fixed(r.reference_check.independent, 3) << " MHz, difference " << fixed(r.reference_check.difference, 3)
     << " MHz (" << (r.reference_check.consistent ? "consistent" : "INCONSISTENT") << ")\n";
  for (const auto& l : r.lines) {
    os << "\n== scan " << l.path << '\n';
    if (l.fit) os << to_text(*l.fit);
    if (l.error) os << "  error: " << l.error->message << '\n';
  }
  for (const auto& s : r.level_sets) {
    os << "\n== levels " << s.path << " (" << s.levels.size() << " rows)\n";
    if (s.error) os << "  error: " << s.error->message << '\n';
    if (s.defect_ionization) {
      os << "  quantum defects for E_i = " << fixed(*s.defect_ionization, 3) << " MHz\n";
      os << "  " << std::setw(4) << "n" << std::setw(18) << "E_n [MHz]" << std::setw(12) << "delta" << '\n';
      for (std::size_t i = 0; i < s.defects.size(); ++i)
        os << "  " << std::setw(4) << s.levels[i].n << std::setw(18) << fixed(s.levels[i].energy, 3) << std::setw(12)
           << fixed(s.defects[i], 6) << '\n';
    }
    for (const auto& f : s.fits) {
      if (f.fit) os << to_text(*f.fit);
      if (f.error) os << "Method " << f.method << " error: " << f.error->message << '\n';
    }
  }
  for (const auto& a : r.allan) {
    os << "\n== Allan deviation " << a.path << '\n';
    if (a.curve) os << to_text(*a.curve);
    if (a.error) os << "  error: " << a.error->message << '\n';
  }
  if (r.budget) {
    os << "\n== error budget " << r.budget->path << '\n';
    if (r.budget->error)
      os << "  error: " << r.budget->error->message << '\n';
    else
      os << to_text(r.budget->budget, r.budget->total);
  }
  os << "\nexit status " << r.exit_status() << '\n';
  return os.str();
}

namespace detail {

inline void write_two_column(const fs::path& path, const char* header,
                             const std::vector<std::pair<double, double>>& rows, std::vector<fs::path>& written) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << header << '\n';
  for (const auto& [x, y] : rows) out << format_number(x) << ' ' << format_number(y) << '\n';
  written.push_back(path);
}

}  // namespace detail

/// Runs every job in the config and writes report.txt, report.json and
/// two-column plot files into the output directory. A missing input aborts
/// before anything is written.
inline AnalysisReport run_analysis(const AnalysisConfig& cfg, std::optional<fs::path> output_override = std::nullopt) {
  for (const auto& p : cfg.inputs())
    if (!fs::is_regular_file(p)) throw IoError("input not found: " + p.string());

  AnalysisReport report;
  report.provenance.config = cfg.source.string();
  Constants constants;
  if (cfg.constants) constants = load_constants(*cfg.constants);
  report.provenance.constants = constants;
  for (const auto& p : cfg.inputs()) report.provenance.inputs.push_back({p.string(), sha256_file(p)});
  const double rydberg = constants.rydberg_mhz();
  report.reference_check =
      reference_cross_check(constants.reference_two_photon_mhz, constants.independent_two_photon_mhz);

  const fs::path out_dir = output_override.value_or(cfg.output_directory);
  fs::create_directories(out_dir);
  const fs::path plots = out_dir / "plots";
  fs::create_directories(plots);

  for (const auto& path : cfg.scans) {
    LineItem item;
    item.path = path.string();
    item.error = detail::capture([&] {
      const ScanFile scan = parse_scan(path);
      item.fit = lineshape::fit_line(scan.trace, {}, constants.dark_rate_floor_hz);
      std::vector<std::pair<double, double>> data, model;
      for (const auto& pt : scan.trace.points) {
        data.emplace_back(pt.frequency, pt.rate);
        model.emplace_back(pt.frequency, lineshape::lorentzian_model(item.fit->params, pt.frequency));
      }
      const std::string stem = path.stem().string();
      detail::write_two_column(plots / (stem + "_line_data.dat"), "frequency_mhz rate_hz", data, report.written);
      detail::write_two_column(plots / (stem + "_line_model.dat"), "frequency_mhz model_rate_hz", model, report.written);
    });
    report.lines.push_back(std::move(item));
  }

  for (const auto& job : cfg.levels) {
    LevelItem item;
    item.path = job.path.string();
    const std::string stem = job.path.stem().string();
    item.error = detail::capture([&] {
      LevelFileOptions opts;
      opts.assembly.reference_two_photon = constants.reference_two_photon_mhz;
      opts.assembly.centroid_offset = constants.centroid_offset_mhz;
      opts.default_sigma = constants.default_level_sigma_mhz;
      item.levels = parse_levels(job.path, opts);
      std::sort(item.levels.begin(), item.levels.end(), [](const auto& a, const auto& b) { return a.n < b.n; });
    });
    if (!item.error) {
      for (int m : job.methods) {
        SeriesFitItem fit_item;
        fit_item.method = m;
        fit_item.error = detail::capture([&] {
          fit_item.fit = ritz::fit_series(item.levels, m, rydberg, {}, job.weighted, job.term_count);
          std::vector<std::pair<double, double>> res;
          for (std::size_t i = 0; i < fit_item.fit->n.size(); ++i)
            res.emplace_back(fit_item.fit->n[i], fit_item.fit->residuals[i]);
          detail::write_two_column(plots / (stem + "_method" + std::to_string(m) + "_residuals.dat"),
                                   "n residual_mhz", res, report.written);
        });
        item.fits.push_back(std::move(fit_item));
      }
      item.defect_ionization = job.ionization_energy;
      if (!item.defect_ionization) {
        for (const auto& f : item.fits)
          if (f.fit && (!item.defect_ionization || f.method == 3)) item.defect_ionization = f.fit->ionization_energy;
      }
      if (item.defect_ionization) {
        const auto err = detail::capture([&] {
          std::vector<std::pair<double, double>> rows;
          for (const auto& l : item.levels) {
            item.defects.push_back(ritz::defect_from_energy(l.n, l.energy, *item.defect_ionization, rydberg));
            rows.emplace_back(l.n, item.defects.back());
          }
          detail::write_two_column(plots / (stem + "_defects.dat"), "n quantum_defect", rows, report.written);
        });
        if (err) {
          item.defects.clear();
          item.error = err;
        }
      }
    }
    report.level_sets.push_back(std::move(item));
  }

  for (const auto& job : cfg.series) {
    AllanItem item;
    item.path = job.path.string();
    item.error = detail::capture([&] {
      const auto series = parse_series(job.path, job.sample_period);
      item.curve = stability::allan_deviation(series);
      std::vector<std::pair<double, double>> rows;
      for (const auto& p : item.curve->points) rows.emplace_back(p.tau, p.deviation);
      detail::write_two_column(plots / (job.path.stem().string() + "_allan.dat"), "tau_s deviation_mhz", rows,
                               report.written);
    });
    report.allan.push_back(std::move(item));
  }

  if (cfg.budget) {
    BudgetItem b;
    b.path = cfg.budget->string();
    b.error = detail::capture([&] {
      b.budget = parse_budget(*cfg.budget);
      b.total = total_systematic(b.budget);
    });
    report.budget = std::move(b);
  }

  {
    std::ofstream txt(out_dir / "report.txt");
    if (!txt) throw IoError("cannot write " + (out_dir / "report.txt").string());
    txt << to_text(report);
    report.written.push_back(out_dir / "report.txt");
  }
  {
    std::ofstream js(out_dir / "report.json");
    if (!js) throw IoError("cannot write " + (out_dir / "report.json").string());
    report.written.push_back(out_dir / "report.json");
    js << to_json(report).dump(2) << '\n';
  }
  return report;
}

inline AnalysisReport run_analysis(const fs::path& config_path, std::optional<fs::path> output_override = std::nullopt) {
  return run_analysis(load_config(config_path), std::move(output_override));
}

}  // namespace rydberg::pipeline
