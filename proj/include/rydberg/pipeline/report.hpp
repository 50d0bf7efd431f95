#pragma once

// Serialization of results: JSON for machines, aligned text for people.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "rydberg/errors.hpp"
#include "rydberg/lineshape.hpp"
#include "rydberg/pipeline/constants.hpp"
#include "rydberg/pipeline/energy.hpp"
#include "rydberg/ritz.hpp"
#include "rydberg/stability.hpp"

namespace rydberg::pipeline {

using nlohmann::json;

enum class OutputFormat { text, machine };

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string general(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorClass::internal, "SHA-256 initialisation failed");
  }
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

// ---- JSON ----

inline json to_json(const lineshape::LorentzianParams& p) {
  return {{"center_mhz", p.center}, {"fwhm_mhz", p.fwhm}, {"amplitude_hz", p.amplitude}, {"baseline_hz", p.baseline}};
}

inline json to_json(const lineshape::LineFitResult& r) {
  return {{"params", to_json(r.params)},
          {"errors", to_json(r.errors)},
          {"residual_norm", r.residual_norm},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"signal_to_noise", r.signal_to_noise},
          {"edge_of_scan", r.edge_of_scan}};
}

inline const char* method_name(ritz::FitMethod m) {
  switch (m) {
    case ritz::FitMethod::extended_ritz: return "extended Ritz (delta0 denominators)";
    case ritz::FitMethod::two_stage: return "two-stage (E_i frozen from method 1)";
    case ritz::FitMethod::modified_ritz: return "modified Ritz (self-consistent defect)";
  }
  return "?";
}

inline const char* kCoefficientNames[] = {"delta0", "delta2", "delta4", "delta6"};

inline json to_json(const ritz::SeriesFit& f) {
  json coeffs = json::object(), errors = json::object();
  errors["ionization_energy_mhz"] = f.errors[0];
  for (int i = 0; i < f.coefficients.term_count; ++i) {
    coeffs[kCoefficientNames[i]] = f.coefficients[i];
    errors[kCoefficientNames[i]] = f.errors[1 + i];
  }
  json cov = json::array();
  for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
    cov.push_back(row);
  }
  json levels = json::array();
  for (std::size_t i = 0; i < f.n.size(); ++i) levels.push_back({{"n", f.n[i]}, {"residual_mhz", f.residuals[i]}});
  return {{"method", static_cast<int>(f.method)},
          {"method_name", method_name(f.method)},
          {"ionization_energy_mhz", f.ionization_energy},
          {"coefficients", coeffs},
          {"errors", errors},
          {"covariance", cov},
          {"term_count", f.coefficients.term_count},
          {"weighted", f.weighted},
          {"converged", f.converged},
          {"rydberg_mhz", f.rydberg},
          {"residual_rms_mhz", f.residual_rms()},
          {"levels", levels}};
}

inline json to_json(const stability::AllanCurve& c) {
  json pts = json::array();
  for (const auto& p : c.points)
    pts.push_back({{"tau_s", p.tau}, {"deviation_mhz", p.deviation}, {"multiple", p.multiple}, {"pairs", p.pair_count}});
  return {{"points", pts}};
}

inline json to_json(const ErrorBudget& b, double total) {
  json items = json::array();
  for (const auto& c : b.contributions) items.push_back({{"label", c.label}, {"sigma_mhz", c.sigma}});
  return {{"contributions", items}, {"total_mhz", total}};
}

inline json to_json(const ReferenceCheck& r) {
  return {{"reference_mhz", r.reference},
          {"independent_mhz", r.independent},
          {"difference_mhz", r.difference},
          {"consistent", r.consistent}};
}

// ---- text ----

inline std::string to_text(const lineshape::LineFitResult& r) {
  std::ostringstream os;
  os << "Lorentzian fit (" << (r.converged ? "converged" : "NOT converged") << ", " << r.iterations
     << " iterations)\n";
  os << "  center    " << std::setw(20) << fixed(r.params.center, 4) << " +- " << general(r.errors.center, 3) << " MHz\n";
  os << "  fwhm      " << std::setw(20) << fixed(r.params.fwhm, 4) << " +- " << general(r.errors.fwhm, 3) << " MHz\n";
  os << "  amplitude " << std::setw(20) << fixed(r.params.amplitude, 4) << " +- " << general(r.errors.amplitude, 3) << " counts/s\n";
  os << "  baseline  " << std::setw(20) << fixed(r.params.baseline, 4) << " +- " << general(r.errors.baseline, 3) << " counts/s\n";
  os << "  S/N " << general(r.signal_to_noise, 4) << ", residual norm " << general(r.residual_norm, 4) << '\n';
  if (r.edge_of_scan) os << "  warning: line center within one FWHM of the scan edge\n";
  return os.str();
}

inline std::string to_text(const ritz::SeriesFit& f) {
  std::ostringstream os;
  os << "Method " << static_cast<int>(f.method) << ": " << method_name(f.method) << ", "
     << (f.weighted ? "weighted" : "unweighted") << ", " << f.n.size() << " levels, "
     << (f.converged ? "converged" : "NOT converged") << '\n';
  os << "  E_i     " << std::setw(18) << fixed(f.ionization_energy, 3) << " +- " << general(f.errors[0], 3) << " MHz\n";
  for (int i = 0; i < f.coefficients.term_count; ++i)
    os << "  " << std::left << std::setw(7) << kCoefficientNames[i] << std::right << ' ' << std::setw(18)
       << general(f.coefficients[i], 8) << " +- " << general(f.errors[1 + i], 3) << '\n';
  os << "  residual rms " << fixed(f.residual_rms(), 3) << " MHz\n";
  return os.str();
}

inline std::string to_text(const stability::AllanCurve& c) {
  std::ostringstream os;
  os << std::setw(14) << "tau [s]" << std::setw(18) << "sigma [MHz]" << std::setw(10) << "pairs" << '\n';
  for (const auto& p : c.points)
    os << std::setw(14) << general(p.tau, 6) << std::setw(18) << general(p.deviation, 6) << std::setw(10)
       << p.pair_count << '\n';
  return os.str();
}

inline std::string to_text(const ErrorBudget& b, double total) {
  std::ostringstream os;
  for (const auto& c : b.contributions)
    os << "  " << std::left << std::setw(20) << c.label << std::right << std::setw(12) << general(c.sigma, 6) << " MHz\n";
  os << "  " << std::left << std::setw(20) << "total (quadrature)" << std::right << std::setw(12) << fixed(total, 3)
     << " MHz\n";
  return os.str();
}

}  // namespace rydberg::pipeline
