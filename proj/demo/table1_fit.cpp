// Fits the shipped n = 36..63 level table with all three methods and prints
// the comparison, then the per-level defects at the method-3 E_i.
//
//   table1_fit [levels.csv] [term_count]

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "rydberg/rydberg.hpp"

namespace rp = rydberg::pipeline;

int main(int argc, char** argv) {
  const std::filesystem::path path = argc > 1 ? argv[1] : RYDBERG_DATA_DIR "/table1_np32.csv";
  const int terms = argc > 2 ? std::atoi(argv[2]) : 4;
  try {
    const rp::Constants k;
    rp::LevelFileOptions opts;
    opts.default_sigma = k.default_level_sigma_mhz;
    const auto levels = rp::parse_levels(path, opts);
    const double R = k.rydberg_mhz();

    rydberg::ritz::SeriesFit last;
    for (int m = 1; m <= 3; ++m) {
      last = rydberg::ritz::fit_series(levels, m, R, {}, false, terms);
      std::cout << rp::to_text(last) << '\n';
    }
    std::cout << "defects at E_i = " << rp::fixed(last.ionization_energy, 1) << " MHz\n";
    for (const auto& l : levels)
      std::cout << std::setw(4) << l.n << "  "
                << rp::fixed(rydberg::ritz::defect_from_energy(l.n, l.energy, last.ionization_energy, R), 6) << '\n';
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
