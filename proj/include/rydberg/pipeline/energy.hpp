#pragma once

// Level-energy assembly from the excitation chain, and the systematic error budget.

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "rydberg/errors.hpp"

namespace rydberg::pipeline {

struct EnergyAssembly {
  double third_step = 0.0;                    ///< MHz
  double reference_two_photon = 770570285.0;  ///< 5S1/2 -> 5D5/2, MHz
  double centroid_offset = 1263.0;            ///< hyperfine-centroid correction, MHz
};

/// E_n = third_step + reference_two_photon + centroid_offset
inline double assemble_energy(const EnergyAssembly& a) {
  if (!std::isfinite(a.third_step) || !std::isfinite(a.reference_two_photon) ||
      !std::isfinite(a.centroid_offset))
    throw InvalidArgument("energy assembly terms must be finite");
  return a.third_step + a.reference_two_photon + a.centroid_offset;
}

struct BudgetContribution {
  std::string label;
  double sigma;  ///< MHz
};

struct ErrorBudget {
  std::vector<BudgetContribution> contributions;

  void validate() const {
    std::set<std::string> labels;
    for (const auto& c : contributions) {
      if (!(c.sigma >= 0) || !std::isfinite(c.sigma))
        throw InvalidArgument("budget entry '" + c.label + "' has a negative sigma");
      if (!labels.insert(c.label).second) throw InvalidArgument("duplicate budget label '" + c.label + "'");
    }
  }
};

/// Uncorrelated contributions added in quadrature.
inline double total_systematic(const ErrorBudget& budget) {
  budget.validate();
  double sum = 0.0;
  for (const auto& c : budget.contributions) sum += c.sigma * c.sigma;
  return std::sqrt(sum);
}

struct ReferenceCheck {
  double reference;    ///< MHz
  double independent;  ///< MHz
  double difference;   ///< reference - independent, MHz
  bool consistent;     ///< |difference| < tolerance
};

/// The assembly reference against an independent measurement of the same transition.
inline ReferenceCheck reference_cross_check(double reference, double independent, double tolerance = 1.0) {
  const double diff = reference - independent;
  return {reference, independent, diff, std::abs(diff) < tolerance};
}

}  // namespace rydberg::pipeline
