#pragma once

#include "caplab/capacity.hpp"
#include "caplab/test_functions.hpp"
#include "caplab/verify.hpp"

namespace caplab {

struct OutputSpec {
  std::string path;             // empty: stdout summary only
  std::string format = "json";  // json | csv
};

struct CheckRequest {
  std::string kind;  // transfer_identity | change_of_variables |
                     // capacity_distortion | capacity_distortion_pp |
                     // energy_bounds | operator_norm
  std::string integrand = "one";   // change_of_variables only
  CellMask set = CellMask::all();  // change_of_variables only
};

// One experiment, parsed strictly: unknown keys are rejected by name.
// Exponents default to NaN (absent); "inf" is accepted as a value.
struct ExperimentConfig {
  std::string command;  // distortion | capacity | verify
  std::string name;     // report identity, defaults to the config file stem
  MappingSpec map;
  Domain domain;
  bool has_image_domain = false;
  Domain image_domain;
  Real p = kNaN, q = kNaN, s = kNaN, r = kNaN;
  bool has_condenser = false;
  CellMask plate_f0 = CellMask::all();
  CellMask plate_f1 = CellMask::all();
  Real condenser_p = kNaN;
  FamilySpec family;
  SolverConfig solver;
  Scheme scheme;
  std::vector<CheckRequest> checks;
  OutputSpec output;
  long long seed = 0;
  Real tol = 0.0;  // 0 selects per-check defaults
  std::string source_text;  // verbatim config, echoed into reports
};

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& name);
ExperimentConfig load_config(const std::string& path);

// Condenser assembled from the config's domain, plates, and exponent
// (condenser "p" falls back to exponents.p).
Condenser build_condenser(const ExperimentConfig& config);

// Deterministic serializations: fixed key order, no wall-clock data.
// Non-finite values encode as the strings "inf", "-inf", "nan".
std::string distortion_report_json(const ExperimentConfig& config,
                                   const DistortionReport& report);
std::string capacity_report_json(const ExperimentConfig& config,
                                 const CapacityResult& result);
std::string verify_report_json(
    const ExperimentConfig& config,
    const std::vector<VerificationVerdict>& verdicts);

// Plot-ready CSV: one row per cell, index columns then the minimizer value.
std::string capacity_minimizer_csv(const ExperimentConfig& config,
                                   const CapacityResult& result);
std::string distortion_report_csv(const DistortionReport& report);

std::string verdict_csv_header();
std::string verdict_csv_row(const std::string& config_name,
                            const VerificationVerdict& verdict);

}  // namespace caplab
