#include "pstrat/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pstrat/errors.hpp"
#include "pstrat/estimators.hpp"
#include "pstrat/numerics.hpp"

namespace pstrat {

namespace {

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct BinaryCells {
  double p0 = 0.0, p1 = 0.0;     // event-free rates per arm
  double phat = 0.0;             // Pr(Y=1 | T=1, S=0)
  double py0 = 0.0;              // Pr(Y=1 | T=0, S=0)
  double pi_identified = 0.0;    // p0 / p1
  std::size_t n_used = 0;
};

void require_binary_outcomes(const TrialDataset& ds) {
  for (const auto& r : ds.records)
    if (r.outcome && *r.outcome != 0.0 && *r.outcome != 1.0)
      throw invalid_config("binary sensitivity analysis needs a 0/1 outcome");
}

BinaryCells binary_cells(const TrialDataset& ds) {
  if (ds.coding.monotonicity != Monotonicity::s1_le_s0)
    throw invalid_coding("binary sensitivity analysis needs S(1) <= S(0) coding");
  require_binary_outcomes(ds);

  std::size_t n0 = 0, n1 = 0, free0 = 0, free1 = 0;
  std::size_t y1n = 0, y1k = 0, y0n = 0, y0k = 0;
  for (const auto& r : ds.records) {
    if (r.trt == 1) {
      ++n1;
      if (r.event == 0) {
        ++free1;
        if (r.outcome) {
          ++y1n;
          y1k += *r.outcome == 1.0;
        }
      }
    } else {
      ++n0;
      if (r.event == 0) {
        ++free0;
        if (r.outcome) {
          ++y0n;
          y0k += *r.outcome == 1.0;
        }
      }
    }
  }
  if (n0 == 0 || n1 == 0) throw empty_arm("binary sensitivity: both arms required");
  if (free0 == 0 || free1 == 0 || y0n == 0 || y1n == 0)
    throw empty_stratum_cell("binary sensitivity: event-free cell with outcomes is empty");

  BinaryCells c;
  c.p0 = static_cast<double>(free0) / static_cast<double>(n0);
  c.p1 = static_cast<double>(free1) / static_cast<double>(n1);
  c.phat = static_cast<double>(y1k) / static_cast<double>(y1n);
  c.py0 = static_cast<double>(y0k) / static_cast<double>(y0n);
  c.pi_identified = c.p0 / c.p1;
  c.n_used = y0n + y1n;
  return c;
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0))
    throw probability_out_of_range(std::string(what) + " = " + std::to_string(p) +
                                   " falls outside [0, 1]; the sensitivity value is "
                                   "infeasible for the observed margins");
}

EstimateReport assemble_binary_report(const char* method, const BinaryCells& c,
                                      double pr_y1_identified) {
  check_probability(pr_y1_identified, "Pr(Y(1)=1 | identified stratum)");
  EstimateReport rep;
  rep.method = method;
  rep.estimand = "Pr(Y(1)=1 | S(0)=0) with Pr(Y(0)=1 | S(0)=0) for the odds ratio";
  rep.point = pr_y1_identified;
  rep.n_used = c.n_used;
  rep.assumptions = {"SUTVA", "randomized assignment", "monotonicity S(1) <= S(0)"};
  rep.sensitivity_params["pr_y0_identified"] = c.py0;
  const double o1 = pr_y1_identified / (1.0 - pr_y1_identified);
  const double o0 = c.py0 / (1.0 - c.py0);
  rep.sensitivity_params["or_identified"] = o1 / o0;
  rep.sensitivity_params["pi_identified"] = c.pi_identified;
  return rep;
}

// Completer outcomes of one arm.
std::vector<double> completer_outcomes(const TrialDataset& ds, int arm) {
  std::vector<double> v;
  for (const auto& r : ds.records)
    if (r.trt == arm && r.event == 0 && r.outcome) v.push_back(*r.outcome);
  return v;
}

double event_free_rate(const TrialDataset& ds, int arm) {
  std::size_t n = 0, free_n = 0;
  for (const auto& r : ds.records) {
    if (r.trt != arm) continue;
    ++n;
    free_n += r.event == 0;
  }
  if (n == 0) throw empty_arm("sensitivity analysis: an arm is empty");
  return static_cast<double>(free_n) / static_cast<double>(n);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct GbhPoint {
  double alpha = 0.0;
  double statistic = 0.0;
};

// Solve the weight intercept and evaluate T(beta) on one dataset. The
// reweighted arm is the event-free mixture; its weighted mean estimates the
// identified stratum's counterfactual there.
GbhPoint gbh_point(const TrialDataset& ds, double beta) {
  const bool weight_control = ds.coding.monotonicity == Monotonicity::s1_ge_s0;
  const int mix_arm = weight_control ? 0 : 1;
  const int id_arm = 1 - mix_arm;

  const std::vector<double> y_mix = completer_outcomes(ds, mix_arm);
  const std::vector<double> y_id = completer_outcomes(ds, id_arm);
  if (y_mix.empty() || y_id.empty())
    throw empty_stratum_cell("gbh_continuous: an event-free cell has no outcomes");

  const double p_mix = event_free_rate(ds, mix_arm);
  const double p_id = event_free_rate(ds, id_arm);
  const double pi = p_id / p_mix; // identified-stratum share of the mixture
  if (pi >= 1.0)
    throw no_bracket("gbh_continuous: event-free rate of the reweighted arm (" +
                     std::to_string(p_mix) + ") does not exceed the other arm's (" +
                     std::to_string(p_id) + ")");

  double ymax = 0.0;
  for (double y : y_mix) ymax = std::max(ymax, std::abs(y));
  const double half_width = std::abs(beta) * (ymax + 1.0) + 1.0;
  const double center = logit(pi);
  const auto constraint = [&](double alpha) {
    double s = 0.0;
    for (double y : y_mix) s += expit(alpha + beta * y);
    return s / (static_cast<double>(y_mix.size()) * pi) - 1.0;
  };
  const double alpha = beta == 0.0
                           ? center
                           : brent_root(constraint, center - half_width,
                                        center + half_width)
                                 .root;

  double wy = 0.0;
  for (double y : y_mix) wy += expit(alpha + beta * y) * y;
  const double mix_mean = wy / (static_cast<double>(y_mix.size()) * pi);
  const double id_mean = mean_of(y_id);

  GbhPoint out;
  out.alpha = alpha;
  out.statistic = mix_arm == 1 ? mix_mean - id_mean : id_mean - mix_mean;
  return out;
}

} // namespace

EstimateReport binary_gamma(const TrialDataset& ds, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw invalid_config("binary_gamma: gamma must lie in [0, 1]");
  const BinaryCells c = binary_cells(ds);
  const double pi = c.pi_identified;
  const double est = c.phat / pi - ((1.0 - pi) / pi) * gamma;
  auto rep = assemble_binary_report("binary_gamma", c, est);
  rep.sensitivity_params["gamma"] = gamma;
  return rep;
}

EstimateReport binary_tau(const TrialDataset& ds, double tau) {
  if (!(tau > 0.0)) throw invalid_config("binary_tau: tau must be positive");
  const BinaryCells c = binary_cells(ds);
  const double est = c.phat / (tau + (1.0 - tau) * c.pi_identified);
  auto rep = assemble_binary_report("binary_tau", c, est);
  rep.sensitivity_params["tau"] = tau;
  return rep;
}

EstimateReport binary_beta(const TrialDataset& ds, double beta) {
  const BinaryCells c = binary_cells(ds);
  const double pi = c.pi_identified;
  if (pi >= 1.0)
    throw no_bracket("binary_beta: event-free rate under treatment does not exceed "
                     "the control rate, so the mixture weight has no solution");
  // mean of expit(alpha + beta*y) over the treated event-free cell must be pi
  const auto constraint = [&](double a) {
    return (expit(a) * (1.0 - c.phat) + expit(a + beta) * c.phat) / pi - 1.0;
  };
  const double half_width = std::abs(beta) + 1.0;
  const double center = logit(pi);
  const double alpha = beta == 0.0
                           ? center
                           : brent_root(constraint, center - half_width,
                                        center + half_width)
                                 .root;
  const double est = c.phat * expit(alpha + beta) / pi;
  auto rep = assemble_binary_report("binary_beta", c, est);
  rep.sensitivity_params["beta"] = beta;
  rep.sensitivity_params["alpha"] = alpha;
  return rep;
}

SensitivityCurve gbh_continuous(const TrialDataset& ds,
                                const std::vector<double>& beta_grid,
                                std::size_t boot_B, std::uint64_t seed,
                                double level) {
  if (beta_grid.empty()) throw invalid_config("gbh_continuous: empty beta grid");
  for (std::size_t i = 1; i < beta_grid.size(); ++i)
    if (!(beta_grid[i] > beta_grid[i - 1]))
      throw invalid_config("gbh_continuous: beta grid must be strictly increasing");
  if (ds.coding.monotonicity == Monotonicity::none)
    throw invalid_coding("gbh_continuous: a monotonicity direction is required");

  SensitivityCurve curve;
  curve.method = "gbh_continuous";
  curve.param_name = "beta";
  curve.assumptions = {"SUTVA", "randomized assignment",
                       ds.coding.monotonicity == Monotonicity::s1_ge_s0
                           ? "monotonicity S(1) >= S(0)"
                           : "monotonicity S(1) <= S(0)",
                       "logistic selection weight in the outcome"};
  curve.meta["weighted_arm"] =
      ds.coding.monotonicity == Monotonicity::s1_ge_s0 ? "control" : "treated";

  for (std::size_t gi = 0; gi < beta_grid.size(); ++gi) {
    const double beta = beta_grid[gi];
    CurvePoint pt;
    pt.param = beta;
    try {
      const GbhPoint base = gbh_point(ds, beta);
      pt.estimate = base.statistic;
      pt.alpha = base.alpha;
      if (boot_B > 0) {
        auto res = bootstrap(
            ds, [beta](const TrialDataset& d) { return gbh_point(d, beta).statistic; },
            boot_B, seed + gi, level, true, 0, true);
        pt.ci = res.ci;
        if (res.n_failed > 0)
          pt.warnings.push_back(std::to_string(res.n_failed) +
                                " bootstrap replicates failed and were skipped");
      }
    } catch (const EstimationError& e) {
      pt.estimate = std::numeric_limits<double>::quiet_NaN();
      pt.alpha = std::numeric_limits<double>::quiet_NaN();
      pt.warnings.push_back(e.what());
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

EstimateReport cace_band_no_monotonicity(const TrialDataset& ds, double pi01,
                                         double beta0, double beta1) {
  if (ds.coding.semantic != Semantic::compliance)
    throw invalid_coding("cace_band_no_monotonicity: needs compliance event coding");

  const double pi0 = event_free_rate(ds, 0); // Pr(S=0 | T=0)
  const double pi1 = event_free_rate(ds, 1);
  if (!(pi01 >= 0.0 && pi01 <= std::min(pi0, 1.0 - pi1) + 1e-12))
    throw infeasible_pi01("cace_band_no_monotonicity: pi01 = " + std::to_string(pi01) +
                          " outside [0, min(" + std::to_string(pi0) + ", " +
                          std::to_string(1.0 - pi1) + ")]");

  const auto y0 = completer_outcomes(ds, 0);
  const auto y1 = completer_outcomes(ds, 1);
  if (y0.empty() || y1.empty())
    throw empty_stratum_cell("cace_band_no_monotonicity: a completer cell has no outcomes");

  const double diff = mean_of(y1) - mean_of(y0);
  const double alpha = (pi01 / pi0) * beta0 - ((pi1 - pi0 + pi01) / pi1) * beta1;

  EstimateReport rep;
  rep.method = "cace_band";
  rep.estimand = "average effect among " + ds.coding.display_name(StrataLabel::S00) + "s";
  rep.point = diff + alpha;
  rep.n_used = y0.size() + y1.size();
  rep.assumptions = {"SUTVA", "randomized assignment",
                     "sensitivity triple (pi01, beta0, beta1) in place of monotonicity"};
  rep.sensitivity_params["pi01"] = pi01;
  rep.sensitivity_params["beta0"] = beta0;
  rep.sensitivity_params["beta1"] = beta1;
  rep.sensitivity_params["alpha"] = alpha;
  rep.meta["pi0"] = std::to_string(pi0);
  rep.meta["pi1"] = std::to_string(pi1);
  return rep;
}

EstimateReport sace_crude(const TrialDataset& ds, double alpha) {
  if (ds.coding.semantic != Semantic::survival)
    throw invalid_coding("sace_crude: needs survival event coding");
  const auto y0 = completer_outcomes(ds, 0);
  const auto y1 = completer_outcomes(ds, 1);
  if (y0.empty() || y1.empty())
    throw empty_stratum_cell("sace_crude: a survivor cell has no outcomes");

  EstimateReport rep;
  rep.method = "sace_crude";
  rep.estimand = "average effect among " + ds.coding.display_name(StrataLabel::S00) + "s";
  rep.point = mean_of(y1) - mean_of(y0) - alpha;
  rep.n_used = y0.size() + y1.size();
  rep.assumptions = {"SUTVA", "randomized assignment",
                     "alpha equals the survivor-mix bias of the treated arm"};
  rep.sensitivity_params["alpha"] = alpha;
  if (alpha > 0.0)
    rep.warnings.push_back("alpha > 0 contradicts the usual plausibility argument "
                           "that selection favors the treated survivors");
  return rep;
}

BoundsReport zhang_rubin_bounds(const TrialDataset& ds) {
  if (ds.coding.semantic != Semantic::survival)
    throw invalid_coding("zhang_rubin_bounds: needs survival event coding");
  if (ds.coding.monotonicity != Monotonicity::s1_le_s0)
    throw invalid_coding("zhang_rubin_bounds: needs S(1) <= S(0) monotonicity");

  const double p0 = event_free_rate(ds, 0);
  const double p1 = event_free_rate(ds, 1);
  double q = p0 / p1;
  if (q > 1.0 + 1e-9)
    throw monotonicity_inconsistent("zhang_rubin_bounds: survivor rate ratio q = " +
                                    std::to_string(q) + " exceeds 1");
  q = std::min(q, 1.0);

  auto y0 = completer_outcomes(ds, 0);
  auto y1 = completer_outcomes(ds, 1);
  if (y0.empty() || y1.empty())
    throw empty_stratum_cell("zhang_rubin_bounds: a survivor cell has no outcomes");

  const double mean0 = mean_of(y0);
  const double mean1 = mean_of(y1);

  // trimmed mean of the best q fraction, fractional weight at the cut
  std::sort(y1.begin(), y1.end());
  if (ds.direction == OutcomeDirection::higher_is_better)
    std::reverse(y1.begin(), y1.end());
  const double n1s = static_cast<double>(y1.size());
  const double keep = n1s * q;
  const std::size_t whole = static_cast<std::size_t>(std::floor(keep));
  double acc = 0.0;
  for (std::size_t i = 0; i < whole && i < y1.size(); ++i) acc += y1[i];
  const double frac = keep - static_cast<double>(whole);
  if (whole < y1.size() && frac > 0.0) acc += frac * y1[whole];
  const double trimmed = acc / keep;

  BoundsReport rep;
  rep.method = "zhang_rubin_bounds";
  rep.estimand = "average effect among " + ds.coding.display_name(StrataLabel::S00) + "s";
  // Trimming toward the best survivors can only move the treated mean in the
  // favorable direction, so the naive contrast is the other end of the band.
  const double naive = mean1 - mean0;
  const double trimmed_contrast = trimmed - mean0;
  rep.lower = std::min(naive, trimmed_contrast);
  rep.upper = std::max(naive, trimmed_contrast);
  rep.n_used = y0.size() + y1.size();
  rep.assumptions = {"SUTVA", "randomized assignment", "monotonicity S(1) <= S(0)",
                     "ranked-mean trimming of treated survivors"};
  rep.sensitivity_params["q"] = q;
  rep.sensitivity_params["p0"] = p0;
  rep.sensitivity_params["p1"] = p1;
  return rep;
}

} // namespace pstrat
