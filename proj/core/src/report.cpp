#include "pstrat/report.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace pstrat {

namespace {

using nlohmann::json;

json interval_json(const Interval& iv) {
  return json{{"low", iv.low}, {"high", iv.high}, {"level", iv.level}};
}

json base_report_json(const EstimateReport& r) {
  json j;
  j["method"] = r.method;
  j["estimand"] = r.estimand;
  j["point"] = r.point;
  j["se"] = r.se ? json(*r.se) : json(nullptr);
  j["ci"] = r.ci ? interval_json(*r.ci) : json(nullptr);
  j["n_used"] = r.n_used;
  j["assumptions"] = r.assumptions;
  j["sensitivity_params"] = r.sensitivity_params;
  j["warnings"] = r.warnings;
  j["meta"] = r.meta;
  return j;
}

std::string csv_num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

std::string to_json(const EstimateReport& r, int indent) {
  return base_report_json(r).dump(indent);
}

std::string to_json(const SensitivityCurve& c, int indent) {
  json j;
  j["method"] = c.method;
  j["param_name"] = c.param_name;
  j["assumptions"] = c.assumptions;
  j["extras"] = c.extras;
  j["meta"] = c.meta;
  json pts = json::array();
  for (const auto& p : c.points) {
    json pj;
    pj["param"] = p.param;
    pj["estimate"] = p.estimate;
    pj["ci"] = p.ci ? interval_json(*p.ci) : json(nullptr);
    pj["alpha"] = std::isnan(p.alpha) ? json(nullptr) : json(p.alpha);
    pj["warnings"] = p.warnings;
    pts.push_back(pj);
  }
  j["points"] = pts;
  return j.dump(indent);
}

std::string to_json(const BoundsReport& b, int indent) {
  json j;
  j["method"] = b.method;
  j["estimand"] = b.estimand;
  j["lower"] = b.lower;
  j["upper"] = b.upper;
  j["ci_lower"] = b.ci_lower ? interval_json(*b.ci_lower) : json(nullptr);
  j["ci_upper"] = b.ci_upper ? interval_json(*b.ci_upper) : json(nullptr);
  j["n_used"] = b.n_used;
  j["assumptions"] = b.assumptions;
  j["sensitivity_params"] = b.sensitivity_params;
  j["warnings"] = b.warnings;
  j["meta"] = b.meta;
  return j.dump(indent);
}

std::string curve_to_csv(const SensitivityCurve& c) {
  std::ostringstream out;
  out << "beta,estimate,ci_low,ci_high,alpha\n";
  for (const auto& p : c.points) {
    out << csv_num(p.param) << ',' << csv_num(p.estimate) << ',';
    if (p.ci) out << csv_num(p.ci->low) << ',' << csv_num(p.ci->high);
    else out << ',';
    out << ',' << csv_num(p.alpha) << '\n';
  }
  return out.str();
}

} // namespace pstrat
