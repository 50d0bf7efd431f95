#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = RYDBERG_DATA_DIR;
const std::string kCli = RYDBERG_CLI;

struct Run {
  int status;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::current_path() / "scratch_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = kCli + " " + args + " >" + out.string() + " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("cli: usage errors exit 1", "[cli]") {
  const auto dir = scratch("usage");
  CHECK(run("", dir).status == 1);
  CHECK(run("no-such-command", dir).status == 1);
  CHECK(run("fit-series " + q(kData / "table1_np32.csv") + " --method 4", dir).status == 1);
  CHECK(run("budget " + q(kData / "error_budget.csv") + " --format xml", dir).status == 1);
  CHECK(run("--version", dir).status == 0);
}

TEST_CASE("cli: budget and self-test", "[cli]") {
  const auto dir = scratch("budget");
  auto r = run("budget " + q(kData / "error_budget.csv") + " --format machine", dir);
  REQUIRE(r.status == 0);
  CHECK_THAT(json::parse(r.out)["total_mhz"].get<double>(), WithinAbs(5.68, 0.02));
  r = run("budget " + q(kData / "error_budget.csv"), dir);
  CHECK_THAT(r.out, ContainsSubstring("Wavemeter"));
  CHECK_THAT(r.out, ContainsSubstring("5.679"));

  r = run("self-test", dir);
  CHECK(r.status == 0);
  CHECK_THAT(r.out, ContainsSubstring("consistent"));

  std::ofstream(dir / "far.json") << R"({"independent_two_photon_mhz": 770570280.0})";
  r = run("self-test --constants " + q(dir / "far.json"), dir);
  CHECK(r.status == 1);
  CHECK_THAT(r.out, ContainsSubstring("INCONSISTENT"));
}

TEST_CASE("cli: defects and fit-series on the table", "[cli]") {
  const auto dir = scratch("levels");
  auto r = run("defects " + q(kData / "table1_np32.csv") + " --ei 1010024692 --format machine", dir);
  REQUIRE(r.status == 0);
  const auto doc = json::parse(r.out);
  REQUIRE(doc["levels"].size() == 28);
  CHECK_THAT(doc["levels"][0]["defect"].get<double>(), WithinAbs(2.64187, 1e-4));

  r = run("fit-series " + q(kData / "table1_np32.csv") + " --method 1 --terms 2 --out " + q(dir / "fit.json") +
              " --format machine",
          dir);
  REQUIRE(r.status == 0);
  CHECK(r.out.empty());
  const auto fit = json::parse(slurp(dir / "fit.json"));
  CHECK(fit["method"] == 1);
  CHECK(fit["coefficients"].size() == 2);
  CHECK(fit["converged"] == true);

  r = run("fit-series " + q(kData / "table1_np32.csv") + " --method 3 --weighted", dir);
  CHECK(r.status == 0);
  CHECK_THAT(r.out, ContainsSubstring("Method 3"));
  CHECK_THAT(r.out, ContainsSubstring("weighted"));
}

TEST_CASE("cli: input errors exit 1", "[cli]") {
  const auto dir = scratch("input_errors");
  CHECK(run("fit-line " + q(dir / "missing.csv"), dir).status == 1);
  std::ofstream(dir / "dup.csv") << "36,236496706\n36,236496706\n";
  auto r = run("fit-series " + q(dir / "dup.csv"), dir);
  CHECK(r.status == 1);
  CHECK_THAT(r.err, ContainsSubstring("duplicate n"));
  std::ofstream(dir / "two.csv") << "36,236496706\n37,236666310\n";
  CHECK(run("fit-series " + q(dir / "two.csv"), dir).status == 1);
  CHECK(run("defects " + q(kData / "table1_np32.csv") + " --ei 1000", dir).status == 1);
}

TEST_CASE("cli: flat scan is rejected as input", "[cli]") {
  const auto dir = scratch("flat");
  std::ofstream spec(dir / "flat.json");
  spec << R"({"center_mhz": 0, "fwhm_mhz": 10, "amplitude_hz": 0, "start_mhz": -40, "stop_mhz": 40,
              "step_mhz": 0.5, "dark_rate_hz": 0.3, "expectation": true})";
  spec.close();
  REQUIRE(run("synth-scan " + q(dir / "flat.json") + " --out " + q(dir / "flat.csv"), dir).status == 0);
  const auto r = run("fit-line " + q(dir / "flat.csv"), dir);
  CHECK(r.status == 1);
  CHECK_THAT(r.err, ContainsSubstring("no line found"));
}

TEST_CASE("cli: synth-scan then fit-line", "[cli]") {
  const auto dir = scratch("scan");
  std::ofstream spec(dir / "scan.json");
  spec << R"({"center_mhz": 236496700, "fwhm_mhz": 10, "amplitude_hz": 90, "start_mhz": 236496660,
              "stop_mhz": 236496740, "step_mhz": 0.5, "dark_rate_hz": 0.3, "seed": 4})";
  spec.close();
  auto r = run("synth-scan " + q(dir / "scan.json"), dir);
  REQUIRE(r.status == 0);
  CHECK_THAT(r.out, ContainsSubstring("# seed: 4"));
  std::ofstream(dir / "scan.csv") << r.out;
  r = run("fit-line " + q(dir / "scan.csv") + " --format machine", dir);
  REQUIRE(r.status == 0);
  const auto fit = json::parse(r.out);
  CHECK_THAT(fit["params"]["center_mhz"].get<double>(), WithinAbs(236496700.0, 1.0));
  CHECK(fit["converged"] == true);

  // same seed, same bytes
  CHECK(run("synth-scan " + q(dir / "scan.json"), dir).out == slurp(dir / "scan.csv"));
  std::ofstream(dir / "bad.json") << R"({"center_mhz": 0, "fwhm": 10})";
  CHECK(run("synth-scan " + q(dir / "bad.json"), dir).status == 1);
}

TEST_CASE("cli: synth-series then fit-series", "[cli]") {
  const auto dir = scratch("series");
  std::ofstream spec(dir / "series.json");
  spec << R"({"ionization_energy_mhz": 1010024700, "n_min": 36, "n_max": 63, "convention": "explicit",
              "coefficients": {"delta0": 2.64157, "delta2": 0.304}})";
  spec.close();
  REQUIRE(run("synth-series " + q(dir / "series.json") + " --out " + q(dir / "levels.csv"), dir).status == 0);
  const auto r = run("fit-series " + q(dir / "levels.csv") + " --method 1 --terms 2 --format machine", dir);
  REQUIRE(r.status == 0);
  const auto fit = json::parse(r.out);
  CHECK_THAT(fit["ionization_energy_mhz"].get<double>(), WithinAbs(1010024700.0, 1e-3));
  CHECK_THAT(fit["coefficients"]["delta0"].get<double>(), WithinAbs(2.64157, 1e-8));
}

TEST_CASE("cli: allan", "[cli]") {
  const auto dir = scratch("allan");
  std::ofstream f(dir / "series.csv");
  f << "# sample_period_s: 2\n";
  for (int i = 0; i < 64; ++i) f << (i % 2 ? "-1\n" : "1\n");
  f.close();
  auto r = run("allan " + q(dir / "series.csv") + " --format machine", dir);
  REQUIRE(r.status == 0);
  const auto doc = json::parse(r.out);
  CHECK(doc["points"][0]["tau_s"] == 2.0);
  CHECK_THAT(doc["points"][0]["deviation_mhz"].get<double>(), WithinAbs(std::sqrt(2.0), 1e-12));
  r = run("allan " + q(dir / "series.csv") + " --sample-period 0.5 --estimator non-overlapping --format machine", dir);
  REQUIRE(r.status == 0);
  CHECK(json::parse(r.out)["points"][1]["pairs"] == 31);
  CHECK(json::parse(r.out)["points"][0]["tau_s"] == 0.5);
}

TEST_CASE("cli: report", "[cli]") {
  const auto dir = scratch("report");
  json cfg = {{"levels", {{{"path", (kData / "table1_np32.csv").string()}, {"methods", {1, 2, 3}}}}},
              {"budget", (kData / "error_budget.csv").string()}};
  std::ofstream(dir / "run.json") << cfg.dump();
  auto r = run("report " + q(dir / "run.json") + " --out " + q(dir / "out") + " --constants " +
                   q(kData / "constants.json"),
               dir);
  CHECK(r.status == 0);
  CHECK_THAT(r.out, ContainsSubstring("Method 2"));
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "plots" / "table1_np32_method1_residuals.dat"));
  const auto doc = json::parse(slurp(dir / "out" / "report.json"));
  CHECK(doc["provenance"]["inputs"].size() == 3);

  std::ofstream(dir / "missing.json") << R"({"levels": [{"path": "gone.csv"}]})";
  r = run("report " + q(dir / "missing.json"), dir);
  CHECK(r.status == 1);
  CHECK_FALSE(fs::exists(dir / "report"));
  std::ofstream(dir / "schema.json") << R"({"levels": [{"path": "gone.csv", "colour": 1}]})";
  CHECK(run("report " + q(dir / "schema.json"), dir).status == 1);
}
