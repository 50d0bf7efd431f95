#pragma once

// Portable random variates. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; the distributions are implemented
// here (the standard library ones are implementation-defined), so seeded
// output is identical across platforms and toolchains.
//
//   uniform  : top 53 bits of one engine draw, scaled to [0, 1)
//   normal   : Box-Muller, two uniforms per variate, cosine branch only
//   poisson  : Knuth multiplication for mean < 10, Hormann PTRS otherwise

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rydberg::random {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal(double mean = 0.0, double sigma = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::int64_t poisson(double mean) {
    if (!(mean > 0)) return 0;
    if (mean < 10.0) {
      const double limit = std::exp(-mean);
      std::int64_t k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    // Transformed rejection with squeeze (PTRS).
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    while (true) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
      if (k < 0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -mean + k * loglam - std::lgamma(k + 1.0))
        return static_cast<std::int64_t>(k);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rydberg::random
