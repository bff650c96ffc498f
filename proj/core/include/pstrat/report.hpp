#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pstrat/numerics.hpp"

namespace pstrat {

// Uniform result record for every estimator. `point` is always oriented
// treated-minus-control for effect estimands; meta["convention"] says so.
struct EstimateReport {
  std::string method;
  std::string estimand;
  double point = 0.0;
  std::optional<double> se;
  std::optional<Interval> ci;
  std::size_t n_used = 0;
  std::vector<std::string> assumptions;
  std::map<std::string, double> sensitivity_params;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> meta;
};

struct CurvePoint {
  double param = 0.0;
  double estimate = 0.0;
  std::optional<Interval> ci;
  double alpha = 0.0; // solved normalization constant, NaN where not defined
  std::vector<std::string> warnings;
};

struct SensitivityCurve {
  std::string method;
  std::string param_name;
  std::vector<CurvePoint> points;
  std::vector<std::string> assumptions;
  std::map<std::string, double> extras;
  std::map<std::string, std::string> meta;
};

struct BoundsReport {
  std::string method;
  std::string estimand;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<Interval> ci_lower;
  std::optional<Interval> ci_upper;
  std::size_t n_used = 0;
  std::vector<std::string> assumptions;
  std::map<std::string, double> sensitivity_params;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> meta;
};

std::string to_json(const EstimateReport& r, int indent = 2);
std::string to_json(const SensitivityCurve& c, int indent = 2);
std::string to_json(const BoundsReport& b, int indent = 2);

// Pinned column layout: beta,estimate,ci_low,ci_high,alpha. The first column
// carries whichever parameter was swept; missing CIs serialize as empty
// fields, alpha as empty where undefined.
std::string curve_to_csv(const SensitivityCurve& c);

} // namespace pstrat
