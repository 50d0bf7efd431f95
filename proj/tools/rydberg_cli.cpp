// rydberg: command-line front end to the analysis library.
//
// Every subcommand takes --constants, --out and --format. Exit status:
// 0 ok, 1 input error, 2 fit failure or non-convergence, 3 internal error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rydberg/rydberg.hpp"

namespace fs = std::filesystem;
namespace rp = rydberg::pipeline;
using nlohmann::json;

namespace {

struct Common {
  std::string constants_path;
  std::string out;
  std::string format = "text";

  rp::OutputFormat output_format() const {
    return format == "machine" ? rp::OutputFormat::machine : rp::OutputFormat::text;
  }
  rp::Constants constants() const {
    return constants_path.empty() ? rp::Constants{} : rp::load_constants(constants_path);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--constants", c.constants_path, "constants file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "write output here instead of stdout");
  cmd->add_option("--format", c.format, "text or machine")->check(CLI::IsMember({"text", "machine"}));
}

/// Sends a result to --out or stdout, as aligned text or JSON.
void emit(const Common& c, const json& machine, const std::string& text) {
  const std::string body = c.output_format() == rp::OutputFormat::machine ? machine.dump(2) + "\n" : text;
  if (c.out.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw rydberg::IoError("cannot write " + c.out);
  f << body;
}

/// Data-producing commands write the file format itself, not a report.
void emit_data(const Common& c, const std::string& data) {
  if (c.out.empty()) {
    std::cout << data;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw rydberg::IoError("cannot write " + c.out);
  f << data;
}

rp::LevelFileOptions level_options(const rp::Constants& k) {
  rp::LevelFileOptions o;
  o.assembly.reference_two_photon = k.reference_two_photon_mhz;
  o.assembly.centroid_offset = k.centroid_offset_mhz;
  o.default_sigma = k.default_level_sigma_mhz;
  return o;
}

int exit_code(rydberg::ErrorClass c) {
  switch (c) {
    case rydberg::ErrorClass::input: return 1;
    case rydberg::ErrorClass::fit: return 2;
    case rydberg::ErrorClass::internal: return 3;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rydberg spectroscopy analysis"};
  app.set_version_flag("--version", std::string(rp::kToolVersion));
  app.require_subcommand(1);
  Common common;
  int status = 0;

  // fit-line
  std::string scan_path;
  auto* fit_line = app.add_subcommand("fit-line", "fit a Lorentzian to a scan trace");
  fit_line->add_option("scan", scan_path, "scan file")->required();
  add_common(fit_line, common);
  fit_line->callback([&] {
    const auto k = common.constants();
    const auto scan = rp::parse_scan(fs::path(scan_path));
    const auto fit = rydberg::lineshape::fit_line(scan.trace, {}, k.dark_rate_floor_hz);
    emit(common, rp::to_json(fit), rp::to_text(fit));
    if (!fit.converged) status = 2;
  });

  // defects
  std::string levels_path;
  double ei = 0.0;
  auto* defects = app.add_subcommand("defects", "quantum defect of each level for a given E_i");
  defects->add_option("levels", levels_path, "level file")->required();
  defects->add_option("--ei", ei, "ionization energy, MHz")->required();
  add_common(defects, common);
  defects->callback([&] {
    const auto k = common.constants();
    const double R = k.rydberg_mhz();
    const auto levels = rp::parse_levels(fs::path(levels_path), level_options(k));
    json rows = json::array();
    std::ostringstream text;
    text << "E_i " << rp::fixed(ei, 3) << " MHz, R " << rp::fixed(R, 5) << " MHz\n";
    text << std::setw(5) << "n" << std::setw(18) << "E_n [MHz]" << std::setw(14) << "defect" << std::setw(14)
         << "t_n" << '\n';
    for (const auto& l : levels) {
      const double d = rydberg::ritz::defect_from_energy(l.n, l.energy, ei, R);
      const double t = rydberg::ritz::t_parameter(l.energy, ei, R);
      rows.push_back({{"n", l.n}, {"energy_mhz", l.energy}, {"defect", d}, {"t", t}});
      text << std::setw(5) << l.n << std::setw(18) << rp::fixed(l.energy, 3) << std::setw(14) << rp::fixed(d, 6)
           << std::setw(14) << rp::general(t, 6) << '\n';
    }
    emit(common, {{"ionization_energy_mhz", ei}, {"rydberg_mhz", R}, {"levels", rows}}, text.str());
  });

  // fit-series
  std::string series_levels;
  int method = 3, terms = 4;
  bool weighted = false;
  auto* fit_series = app.add_subcommand("fit-series", "fit E_i and defect coefficients to a level table");
  fit_series->add_option("levels", series_levels, "level file")->required();
  fit_series->add_option("--method", method, "1, 2 or 3")->check(CLI::IsMember({1, 2, 3}))->capture_default_str();
  fit_series->add_flag("--weighted", weighted, "weight by per-level sigma");
  fit_series->add_option("--terms", terms, "defect terms, 1 to 4")->check(CLI::Range(1, 4))->capture_default_str();
  add_common(fit_series, common);
  fit_series->callback([&] {
    const auto k = common.constants();
    const auto levels = rp::parse_levels(fs::path(series_levels), level_options(k));
    const auto fit = rydberg::ritz::fit_series(levels, method, k.rydberg_mhz(), {}, weighted, terms);
    emit(common, rp::to_json(fit), rp::to_text(fit));
    if (!fit.converged) status = 2;
  });

  // allan
  std::string series_path, estimator = "overlapping";
  std::optional<double> sample_period;
  auto* allan = app.add_subcommand("allan", "Allan deviation of a frequency series");
  allan->add_option("series", series_path, "series file")->required();
  allan->add_option("--sample-period", sample_period, "seconds per sample (else from file metadata)");
  allan->add_option("--estimator", estimator, "overlapping or non-overlapping")
      ->check(CLI::IsMember({"overlapping", "non-overlapping"}))
      ->capture_default_str();
  add_common(allan, common);
  allan->callback([&] {
    const auto series = rp::parse_series(fs::path(series_path), sample_period);
    const auto est = estimator == "overlapping" ? rydberg::stability::Estimator::overlapping
                                                : rydberg::stability::Estimator::non_overlapping;
    const auto multiples = rydberg::stability::default_multiples(series.samples.size());
    const auto curve = rydberg::stability::allan_deviation(series, multiples, est);
    emit(common, rp::to_json(curve), rp::to_text(curve));
  });

  // budget
  std::string budget_path;
  auto* budget = app.add_subcommand("budget", "quadrature total of a systematic error budget");
  budget->add_option("budget-file", budget_path, "budget file")->required();
  add_common(budget, common);
  budget->callback([&] {
    const auto b = rp::parse_budget(fs::path(budget_path));
    const double total = rp::total_systematic(b);
    emit(common, rp::to_json(b, total), rp::to_text(b, total));
  });

  // synth-series / synth-scan
  std::string synth_series_spec, synth_scan_spec;
  auto* synth_series = app.add_subcommand("synth-series", "write a synthetic level table from a JSON spec");
  synth_series->add_option("spec", synth_series_spec, "spec file")->required();
  add_common(synth_series, common);
  synth_series->callback([&] {
    const auto k = common.constants();
    const auto spec = rp::series_spec_from_json(rp::read_json_file(synth_series_spec), k.rydberg_mhz(),
                                                synth_series_spec);
    const auto levels = rydberg::synth::synth_series(spec);
    rp::EnergyAssembly assembly;
    assembly.reference_two_photon = k.reference_two_photon_mhz;
    assembly.centroid_offset = k.centroid_offset_mhz;
    std::ostringstream os;
    rp::write_levels(os, levels, assembly, {{"seed", std::to_string(spec.seed)}});
    emit_data(common, os.str());
  });

  auto* synth_scan = app.add_subcommand("synth-scan", "write a synthetic scan trace from a JSON spec");
  synth_scan->add_option("spec", synth_scan_spec, "spec file")->required();
  add_common(synth_scan, common);
  synth_scan->callback([&] {
    const auto spec = rp::scan_spec_from_json(rp::read_json_file(synth_scan_spec), synth_scan_spec);
    std::ostringstream os;
    rp::write_scan(os, rydberg::synth::synth_scan(spec), {{"seed", std::to_string(spec.seed)}});
    emit_data(common, os.str());
  });

  // report
  std::string config_path;
  auto* report = app.add_subcommand("report", "run a full analysis from a config file");
  report->add_option("config", config_path, "analysis config (JSON)")->required();
  add_common(report, common);
  report->callback([&] {
    auto cfg = rp::load_config(config_path);
    if (!common.constants_path.empty()) cfg.constants = fs::path(common.constants_path);
    std::optional<fs::path> out;
    if (!common.out.empty()) out = fs::path(common.out);
    const auto r = rp::run_analysis(cfg, out);
    if (common.output_format() == rp::OutputFormat::machine)
      std::cout << rp::to_json(r).dump(2) << '\n';
    else
      std::cout << rp::to_text(r);
    status = r.exit_status();
  });

  // self-test
  auto* self_test = app.add_subcommand("self-test", "check the two-photon reference against the independent value");
  add_common(self_test, common);
  self_test->callback([&] {
    const auto k = common.constants();
    const auto check = rp::reference_cross_check(k.reference_two_photon_mhz, k.independent_two_photon_mhz);
    std::ostringstream text;
    text << "reference two-photon " << rp::fixed(check.reference, 3) << " MHz, independent "
         << rp::fixed(check.independent, 3) << " MHz, difference " << rp::fixed(check.difference, 3) << " MHz: "
         << (check.consistent ? "consistent" : "INCONSISTENT") << '\n';
    emit(common, rp::to_json(check), text.str());
    if (!check.consistent) status = 1;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const rydberg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return status;
}
