// Monte-Carlo look at line-center scatter for a 10 MHz wide line sampled
// every 0.5 MHz.
//
//   line_fit [trials] [amplitude_hz]

#include <cmath>
#include <cstdlib>
#include <iostream>

#include "rydberg/rydberg.hpp"

int main(int argc, char** argv) {
  const int trials = argc > 1 ? std::atoi(argv[1]) : 200;
  const double amplitude = argc > 2 ? std::atof(argv[2]) : 90.0;

  rydberg::synth::ScanSpec spec;
  spec.line = {0.0, 10.0, amplitude, 0.0};
  spec.start = -50;
  spec.stop = 50;
  spec.step = 0.5;
  spec.dark_rate = 0.3;
  std::cout << "configured S/N " << spec.configured_signal_to_noise() << '\n';

  double sum = 0, sum_sq = 0, reported = 0;
  int within = 0;
  for (int t = 0; t < trials; ++t) {
    spec.seed = 1000 + static_cast<std::uint64_t>(t);
    const auto fit = rydberg::lineshape::fit_line(rydberg::synth::synth_scan(spec));
    const double c = fit.params.center;
    sum += c;
    sum_sq += c * c;
    reported += fit.errors.center;
    if (std::abs(c) < 0.5) ++within;
  }
  const double mean = sum / trials;
  std::cout << "center mean " << mean << " MHz, scatter " << std::sqrt(sum_sq / trials - mean * mean)
            << " MHz, mean reported error " << reported / trials << " MHz\n";
  std::cout << within << " of " << trials << " within 0.5 MHz\n";
}
