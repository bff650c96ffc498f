#include "pstrat/estimators.hpp"

#include <cmath>
#include <string>

#include "pstrat/errors.hpp"
#include "pstrat/numerics.hpp"

namespace pstrat {

namespace {

struct CellStats {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0; // sample variance of the cell
};

// Mean/variance of Y over one arm, optionally restricted to S=0, skipping
// missing outcomes.
CellStats outcome_cell(const TrialDataset& ds, int arm, bool completers_only,
                       std::size_t* n_dropped = nullptr) {
  CellStats c;
  double sum = 0.0;
  for (const auto& r : ds.records) {
    if (r.trt != arm) continue;
    if (completers_only && r.event != 0) continue;
    if (!r.outcome.has_value()) {
      if (n_dropped) ++*n_dropped;
      continue;
    }
    sum += *r.outcome;
    ++c.n;
  }
  if (c.n == 0) return c;
  c.mean = sum / static_cast<double>(c.n);
  double ss = 0.0;
  for (const auto& r : ds.records) {
    if (r.trt != arm) continue;
    if (completers_only && r.event != 0) continue;
    if (!r.outcome.has_value()) continue;
    const double d = *r.outcome - c.mean;
    ss += d * d;
  }
  c.var = c.n > 1 ? ss / static_cast<double>(c.n - 1) : 0.0;
  return c;
}

void attach_normal_ci(EstimateReport& rep, const CellStats& c1, const CellStats& c0) {
  if (c1.n > 1 && c0.n > 1) {
    const double se = std::sqrt(c1.var / static_cast<double>(c1.n) +
                                c0.var / static_cast<double>(c0.n));
    rep.se = se;
    const double z = normal_quantile(0.975);
    rep.ci = Interval{rep.point - z * se, rep.point + z * se, 0.95};
  }
}

} // namespace

EstimateReport itt_effect(const TrialDataset& ds) {
  if (ds.arm_count(0) == 0 || ds.arm_count(1) == 0)
    throw empty_arm("itt_effect: both arms required");
  std::size_t dropped = 0;
  const CellStats c0 = outcome_cell(ds, 0, false, &dropped);
  const CellStats c1 = outcome_cell(ds, 1, false, &dropped);
  if (c0.n == 0 || c1.n == 0)
    throw empty_arm("itt_effect: an arm has no non-missing outcomes");

  EstimateReport rep;
  rep.method = "itt";
  rep.estimand = "intention-to-treat mean difference";
  rep.point = c1.mean - c0.mean;
  rep.n_used = c0.n + c1.n;
  rep.assumptions = {"SUTVA", "randomized assignment"};
  attach_normal_ci(rep, c1, c0);
  if (dropped > 0)
    rep.warnings.push_back(std::to_string(dropped) + " records dropped for missing outcome");
  return rep;
}

EstimateReport naive_completers(const TrialDataset& ds) {
  if (ds.arm_count(0) == 0 || ds.arm_count(1) == 0)
    throw empty_arm("naive_completers: both arms required");
  const CellStats c0 = outcome_cell(ds, 0, true);
  const CellStats c1 = outcome_cell(ds, 1, true);
  if (c0.n == 0)
    throw empty_stratum_cell("naive_completers: no control completers with outcomes");
  if (c1.n == 0)
    throw empty_stratum_cell("naive_completers: no treated completers with outcomes");

  EstimateReport rep;
  rep.method = "naive_completers";
  rep.estimand = "completers mean difference (descriptive, not causal)";
  rep.point = c1.mean - c0.mean;
  rep.n_used = c0.n + c1.n;
  rep.assumptions = {"SUTVA", "randomized assignment",
                     "none for causal reading: completer sets are selected"};
  attach_normal_ci(rep, c1, c0);
  return rep;
}

EstimateReport cace_iv(const TrialDataset& ds, double eps) {
  if (ds.coding.semantic != Semantic::treatment_taken)
    throw invalid_coding("cace_iv: needs treatment-taken event coding");
  if (ds.coding.monotonicity == Monotonicity::s1_le_s0)
    throw invalid_coding("cace_iv: declared monotonicity rules out compliers");

  EstimateReport itt = itt_effect(ds);

  std::size_t n0 = 0, n1 = 0, comply0 = 0, comply1 = 0;
  for (const auto& r : ds.records) {
    if (r.trt == 1) {
      ++n1;
      comply1 += r.event == 1; // took treatment as assigned
    } else {
      ++n0;
      comply0 += r.event == 0; // took control as assigned
    }
  }
  const double p1 = static_cast<double>(comply1) / static_cast<double>(n1);
  const double p0 = static_cast<double>(comply0) / static_cast<double>(n0);
  const double pi01 = p1 + p0 - 1.0;
  if (pi01 <= 0.0)
    throw positivity_violation("cace_iv: complier proportion estimate " +
                               std::to_string(pi01) + " is not positive");
  if (pi01 < eps)
    throw positivity_violation("cace_iv: complier proportion estimate " +
                               std::to_string(pi01) + " is below the floor " +
                               std::to_string(eps));

  EstimateReport rep;
  rep.method = "cace_iv";
  rep.estimand = "average effect among " + ds.coding.display_name(StrataLabel::S01) + "s";
  rep.point = itt.point / pi01;
  rep.n_used = itt.n_used;
  rep.assumptions = {"SUTVA", "randomized assignment", "exclusion restriction",
                     "monotonicity (no defiers)", "positivity of the complier stratum"};
  rep.warnings = itt.warnings;
  rep.meta["pi01"] = std::to_string(pi01);
  rep.meta["p0"] = std::to_string(p0);
  rep.meta["p1"] = std::to_string(p1);
  if (itt.se) {
    // Delta method treating the complier proportion as fixed understates the
    // variance; flag it so callers prefer the bootstrap.
    rep.se = *itt.se / pi01;
    const double z = normal_quantile(0.975);
    rep.ci = Interval{rep.point - z * *rep.se, rep.point + z * *rep.se, 0.95};
    rep.warnings.push_back("se ignores the sampling variation of the complier proportion");
  }
  return rep;
}

} // namespace pstrat
