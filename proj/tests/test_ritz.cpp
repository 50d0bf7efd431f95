#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "fixtures/table1.hpp"
#include "rydberg/random.hpp"
#include "rydberg/ritz.hpp"
#include "rydberg/synth.hpp"

using namespace rydberg;
using ritz::RitzCoefficients;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double R = ritz::rydberg_frequency_constant(10973660.672249);
constexpr double kEiPublished = 1010024700.0;
// The value the table's defect column was actually computed with.
constexpr double kEiTable = 1010024692.0;
const RitzCoefficients kMethod3{2.64157, 0.304, 1.15, 1.2, 4};

std::vector<ritz::LevelRecord> table_levels() {
  std::vector<ritz::LevelRecord> out;
  for (const auto& row : fixtures::kTable1) out.push_back({row.n, row.energy, 4.0, row.third_step});
  return out;
}

synth::SeriesSpec wide_spec(ritz::Convention conv, int terms) {
  synth::SeriesSpec s;
  s.ionization_energy = 1010024700.0;
  s.coefficients = {2.64157, 0.304, terms > 2 ? 1.15 : 0.0, terms > 3 ? 1.2 : 0.0, terms};
  s.n_min = 10;
  s.n_max = 100;
  s.rydberg = R;
  s.convention = conv;
  return s;
}

}  // namespace

TEST_CASE("Rydberg frequency constant", "[ritz]") {
  CHECK_THAT(R, WithinRel(3.2898207061e9, 1e-10));
  CHECK_THAT(ritz::rydberg_frequency_constant(1.0 / 299792458.0), WithinRel(1e-6, 1e-15));
  CHECK_THROWS_AS(ritz::rydberg_frequency_constant(0.0), InvalidArgument);
  CHECK_THROWS_AS(ritz::rydberg_frequency_constant(-1.0), InvalidArgument);
}

TEST_CASE("level energy and defect basics", "[ritz]") {
  CHECK(ritz::level_energy(1, 0.0, R, R) == 0.0);
  CHECK_THROWS_AS(ritz::level_energy(2, 2.0, kEiPublished, R), InvalidQuantumNumber);
  CHECK_THROWS_AS(ritz::defect_from_energy(36, kEiPublished, kEiPublished, R), UnboundLevel);
  CHECK_THROWS_AS(ritz::defect_from_energy(36, kEiPublished + 1, kEiPublished, R), UnboundLevel);
}

TEST_CASE("table rows at the table's own ionization energy", "[ritz]") {
  const auto& r36 = fixtures::kTable1.front();
  const auto& r63 = fixtures::kTable1.back();
  CHECK_THAT(ritz::level_energy(36, r36.defect, kEiTable, R), WithinAbs(r36.energy, 5.0));
  CHECK_THAT(ritz::level_energy(63, r63.defect, kEiTable, R), WithinAbs(r63.energy, 5.0));
  for (const auto& row : fixtures::kTable1) {
    CAPTURE(row.n);
    CHECK_THAT(ritz::defect_from_energy(row.n, row.energy, kEiTable, R), WithinAbs(row.defect, 1e-4));
  }
}

TEST_CASE("table rows at E_i = 1010024700", "[table-literal]") {
  CHECK_THAT(ritz::level_energy(36, 2.64187, kEiPublished, R), WithinAbs(1007068254.0, 5.0));
  CHECK_THAT(ritz::level_energy(63, 2.64165, kEiPublished, R), WithinAbs(1009121672.0, 5.0));
  CHECK_THAT(ritz::defect_from_energy(36, 1007068254.0, kEiPublished, R), WithinAbs(2.64187, 1e-4));
  CHECK_THAT(ritz::defect_from_energy(50, 1008557870.0, kEiPublished, R), WithinAbs(2.64155, 1e-4));
}

TEST_CASE("residual rms on the table is below 4 MHz", "[table-literal]") {
  const auto levels = table_levels();
  for (int m = 1; m <= 3; ++m) {
    CAPTURE(m);
    CHECK(ritz::fit_series(levels, m, R).residual_rms() < 4.0);
  }
}

TEST_CASE("method 3 on the table against the reference fit", "[table-literal]") {
  const auto fit = ritz::fit_series(table_levels(), ritz::FitMethod::modified_ritz, R);
  CHECK_THAT(fit.ionization_energy, WithinAbs(kEiPublished, 30.0));
  CHECK_THAT(fit.coefficients.delta0, WithinAbs(2.64157, 5e-4));
}

TEST_CASE("defect and energy are inverse maps", "[ritz]") {
  for (int n = 36; n <= 63; ++n) {
    const double d = ritz::defect_from_energy(n, ritz::level_energy(n, 2.64, kEiPublished, R), kEiPublished, R);
    CHECK_THAT(d, WithinRel(2.64, 1e-12));
  }
  const double eps = std::numeric_limits<double>::epsilon();
  for (int n = 10; n <= 200; n += 7)
    for (double delta = 0.0; delta <= 4.0; delta += 0.5) {
      CAPTURE(n, delta);
      const double e = ritz::level_energy(n, delta, kEiPublished, R);
      const double back = ritz::defect_from_energy(n, e, kEiPublished, R);
      CHECK_THAT(ritz::level_energy(n, back, kEiPublished, R), WithinRel(e, 1e-12));
      // E_n is only known to ~eps*E_i, and d(delta)/dE = (n - delta)^3 / 2R.
      const double nstar = n - delta;
      CHECK(std::abs(back - delta) <= 4 * eps * kEiPublished * nstar * nstar * nstar / (2 * R));
    }
}

TEST_CASE("t parameter", "[ritz]") {
  const auto& r36 = fixtures::kTable1.front();
  CHECK_THAT(ritz::t_parameter(r36.energy, kEiPublished, R), WithinAbs(2956446.0 / 3.2898207061e9, 1e-7));
  CHECK_THAT(ritz::t_parameter(kEiPublished - R, kEiPublished, R), WithinRel(1.0, 1e-15));
  for (const auto& row : fixtures::kTable1) {
    const double d = ritz::defect_from_energy(row.n, row.energy, kEiPublished, R);
    CHECK_THAT(ritz::t_parameter(row.energy, kEiPublished, R), WithinRel(1.0 / ((row.n - d) * (row.n - d)), 1e-12));
  }
  CHECK_THROWS_AS(ritz::t_parameter(kEiPublished, kEiPublished, R), UnboundLevel);
}

TEST_CASE("explicit defect series", "[ritz]") {
  CHECK_THAT(ritz::eval_defect_extended(kMethod3, 36), WithinAbs(2.641845, 5e-6));
  const RitzCoefficients flat{2.5, 0.0, 0.0, 0.0, 4};
  for (int n : {5, 36, 100}) CHECK(ritz::eval_defect_extended(flat, n) == 2.5);

  const RitzCoefficients two{2.0, 0.7, 0.0, 0.0, 2};
  const double near = ritz::eval_defect_extended(two, 12) - 2.0;  // n - delta0 = 10
  const double far = ritz::eval_defect_extended(two, 22) - 2.0;   // n - delta0 = 20
  CHECK_THAT(far, WithinRel(near / 4.0, 1e-12));
  CHECK_THROWS_AS(ritz::eval_defect_extended(kMethod3, 2), InvalidQuantumNumber);
}

TEST_CASE("implicit defect series", "[ritz]") {
  const RitzCoefficients flat{2.64, 0.0, 0.0, 0.0, 4};
  const auto one = ritz::solve_defect_implicit(flat, 36);
  CHECK(one.value == 2.64);
  CHECK(one.iterations == 1);

  const auto m3 = ritz::solve_defect_implicit(kMethod3, 36, 1e-12);
  CHECK(m3.iterations <= 5);
  CHECK(std::abs(m3.value - ritz::eval_defect_extended(kMethod3, 36)) < 1e-7);
  for (int n = 10; n <= 100; n += 9) {
    const double d = ritz::eval_defect_implicit(kMethod3, n, 1e-12);
    const double ns = n - d;
    const double rhs = kMethod3.delta0 + kMethod3.delta2 / (ns * ns) + kMethod3.delta4 / std::pow(ns, 4) +
                       kMethod3.delta6 / std::pow(ns, 6);
    CHECK(std::abs(d - rhs) < 1e-12);
  }
  CHECK_THROWS_AS(ritz::solve_defect_implicit(kMethod3, 3), InvalidQuantumNumber);
  const RitzCoefficients wild{2.0, 50.0, 0.0, 0.0, 2};
  CHECK_THROWS_AS(ritz::solve_defect_implicit(wild, 4), DivergentSeries);
}

TEST_CASE("series energies rise toward the limit", "[ritz]") {
  for (auto conv : {ritz::Convention::explicit_delta0, ritz::Convention::implicit}) {
    double prev = -1e300;
    for (int n = 5; n <= 400; ++n) {
      const double e = ritz::series_energy(conv, kEiPublished, kMethod3, n, R);
      CHECK(e > prev);
      CHECK(e < kEiPublished);
      prev = e;
    }
    CHECK(kEiPublished - ritz::series_energy(conv, kEiPublished, kMethod3, 5000, R) < 200.0);
  }
}

TEST_CASE("zero-noise round trip, n = 36..63", "[ritz][fit]") {
  // E_i and delta0; the higher terms are ill-determined over this range.
  for (int m = 1; m <= 3; ++m) {
    CAPTURE(m);
    synth::SeriesSpec s = wide_spec(m == 3 ? ritz::Convention::implicit : ritz::Convention::explicit_delta0, 3);
    s.n_min = 36;
    s.n_max = 63;
    const auto fit = ritz::fit_series(synth::synth_series(s), m, R, {}, false, 3);
    CHECK(fit.converged);
    CHECK(std::abs(fit.ionization_energy - s.ionization_energy) < 1e-3);
    CHECK(std::abs(fit.coefficients.delta0 - s.coefficients.delta0) < 1e-8);
  }
}

TEST_CASE("zero-noise round trip, n = 10..100", "[ritz][fit]") {
  for (int m = 1; m <= 3; ++m) {
    CAPTURE(m);
    const auto s = wide_spec(m == 3 ? ritz::Convention::implicit : ritz::Convention::explicit_delta0, 3);
    const auto fit = ritz::fit_series(synth::synth_series(s), m, R, {}, false, 3);
    CHECK(std::abs(fit.ionization_energy - s.ionization_energy) < 1e-3);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(fit.coefficients[i] - s.coefficients[i]) < 1e-6);
    CHECK(fit.residual_rms() < 1e-6);
  }
}

TEST_CASE("weighted fits and trusted errors", "[ritz][fit]") {
  auto s = wide_spec(ritz::Convention::implicit, 4);
  s.noise_sigma = 1.0;
  s.seed = 3;
  const auto levels = synth::synth_series(s);
  const auto fit = ritz::fit_series(levels, 3, R, {}, true);
  CHECK(fit.weighted);
  CHECK(fit.converged);
  CHECK(std::abs(fit.ionization_energy - s.ionization_energy) < 5 * fit.errors[0]);
}

TEST_CASE("shifting all energies shifts only E_i", "[ritz][fit]") {
  for (int m = 1; m <= 3; ++m) {
    CAPTURE(m);
    auto s = wide_spec(m == 3 ? ritz::Convention::implicit : ritz::Convention::explicit_delta0, 3);
    s.noise_sigma = 1.0;
    s.seed = 17;
    auto levels = synth::synth_series(s);
    const auto a = ritz::fit_series(levels, m, R, {}, false, 3);
    for (auto& l : levels) l.energy += 1024.0;
    const auto b = ritz::fit_series(levels, m, R, {}, false, 3);
    CHECK_THAT(b.ionization_energy - a.ionization_energy, WithinAbs(1024.0, 1e-6));
    for (int i = 0; i < 3; ++i) CHECK_THAT(b.coefficients[i], WithinAbs(a.coefficients[i], 1e-9));
  }
}

TEST_CASE("methods 1 and 3 agree within one sigma on noisy data", "[ritz][fit][montecarlo]") {
  int agree = 0;
  for (int t = 0; t < 200; ++t) {
    synth::SeriesSpec s;
    s.ionization_energy = kEiPublished;
    s.coefficients = kMethod3;
    s.rydberg = R;
    s.noise_sigma = 1.0;
    s.seed = 9000 + static_cast<std::uint64_t>(t);
    const auto levels = synth::synth_series(s);
    const auto a = ritz::fit_series(levels, 1, R);
    const auto b = ritz::fit_series(levels, 3, R);
    if (std::abs(a.coefficients.delta0 - b.coefficients.delta0) < std::max(a.errors[1], b.errors[1])) ++agree;
  }
  CHECK(agree >= 136);
}

TEST_CASE("fit_series input checks", "[ritz][fit]") {
  auto levels = table_levels();
  CHECK_THROWS_AS(ritz::fit_series(std::span(levels).first(7), 3, R), InsufficientData);
  CHECK_NOTHROW(ritz::fit_series(std::span(levels).first(8), 3, R));
  CHECK_THROWS_AS(ritz::fit_series(levels, 4, R), InvalidArgument);
  CHECK_THROWS_AS(ritz::fit_series(levels, 3, R, {}, false, 5), InvalidArgument);
  CHECK_THROWS_AS(ritz::fit_series(levels, 3, 0.0), InvalidArgument);
}

TEST_CASE("predict_level", "[ritz]") {
  const auto levels = table_levels();
  const auto fit = ritz::fit_series(levels, 3, R);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto [e, sigma] = ritz::predict_level(fit, levels[i].n);
    CHECK_THAT(e, WithinAbs(levels[i].energy - fit.residuals[i], 1e-6));
    CHECK(sigma > 0);
  }
  const auto [e70, s70] = ritz::predict_level(fit, 70);
  CHECK(e70 > fixtures::kTable1.back().energy);
  CHECK(e70 < fit.ionization_energy);

  auto exact = fit;
  exact.covariance.setZero();
  CHECK(ritz::predict_level(exact, 70).second == 0.0);
}
