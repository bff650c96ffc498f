#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pstrat/data.hpp"

namespace pstrat {

// Simulation engine: generates populations with the full counterfactual table
// (S(0), S(1), Y(0), Y(1), staged paths) so that true stratum effects can be
// computed by enumeration and estimators checked against them.

struct CovariateSpec {
  enum class Kind { normal, bernoulli };
  Kind kind = Kind::normal;
  double a = 0.0; // normal mean / bernoulli success probability
  double b = 1.0; // normal sd (ignored for bernoulli)
  std::string name; // empty -> auto "x<j>"
};

// Strata drawn from softmax(x'eta_u) over the four cells. Coefficients are
// intercept-first over the covariates. confounder_load adds a latent-factor
// term to the corresponding stratum logit.
struct MechMultinomialLogit {
  std::array<std::vector<double>, 4> eta; // indexed by StrataLabel
  std::array<double, 4> confounder_load{0.0, 0.0, 0.0, 0.0};
};

// S(0) and S(1) drawn from independent logistic models given x. A nonzero
// s0_in_s1 coefficient makes S(1) depend on the realized S(0), breaking
// cross-world independence while leaving both margins intact.
struct MechIndependent {
  std::vector<double> s0_coef;
  std::vector<double> s1_coef;
  double s0_in_s1 = 0.0;
};

// Monotone dropout whose selection into the identified margin follows a
// logistic weight in the outcome. Under s1_le_s0 the event indicator S(1) is
// drawn from event_coef and Pr(S(0)=0 | S(1)=0, Y(1)=y) = expit(alpha+beta*y);
// under s1_ge_s0 the arms swap roles. Outcomes come from the S00 entry of the
// outcome table for every subject, since the stratum is only decided after
// the outcome exists.
struct MechMonotoneSelection {
  Monotonicity direction = Monotonicity::s1_le_s0;
  std::vector<double> event_coef; // logit of the event in the anchoring arm
  double alpha = 0.0;
  double beta = 0.0;
};

// Treatment-taken strata with the defier cell empty by default and the
// outcome unaffected by assignment (Y(1) = Y(0) exactly) for never-takers and
// always-takers. Complier logit is the softmax reference (zero).
struct MechExclusionCompliance {
  std::vector<double> never_coef;  // stratum S00
  std::vector<double> always_coef; // stratum S11
  double defier_logit = -1e9;      // raise above -inf for the violated twin
};

using StrataMechanism = std::variant<MechMultinomialLogit, MechIndependent,
                                     MechMonotoneSelection, MechExclusionCompliance>;

struct StratumOutcome {
  std::vector<double> beta;     // intercept-first mean model for Y(0)
  double delta = 0.0;           // added to the Y(1) mean
  double sd = 1.0;
  double confounder_load = 0.0; // latent-factor loading on both arms
};

// One stage of a staged design. Stage k draws the adherence event from
// s_coef over [1, x, z(1..k-1)], then (for k < K) the intermediate from
// z_coef over the same regressors. y_residual_load ties the event logit to
// the arm's outcome noise, used by violated twins.
struct StagedStage {
  std::vector<double> s_coef;
  double treated_s_shift = 0.0;
  std::vector<double> z_coef;
  double z_sd = 1.0;
  double treated_z_shift = 0.0;
  double y_residual_load = 0.0;
};

struct StagedSpec {
  std::vector<StagedStage> stages; // K entries; the last stage has no Z
  std::vector<double> y_coef;      // outcome mean over [1, x, z(1..K-1)]
  double y_delta = 0.0;            // treated shift of the outcome mean
  double y_sd = 1.0;
};

struct Assignment {
  bool randomized = true;
  double p = 0.5;
  std::vector<double> logit_coef; // used when randomized = false
  double confounder_load = 0.0;
};

struct DGPConfig {
  std::size_t n = 0;
  std::vector<CovariateSpec> covariates;
  StrataMechanism mechanism;
  std::array<StratumOutcome, 4> outcomes; // indexed by StrataLabel
  double cross_world_rho = 0.0;           // residual correlation of Y(0),Y(1)
  bool binary_outcome = false;
  std::optional<StagedSpec> staged; // when set, strata/outcome mechanism unused
  Assignment assignment;
  EventCoding coding;
  OutcomeDirection direction = OutcomeDirection::lower_is_better;
  bool hide_outcome_on_event = false; // dropout-style observability of Y
  bool latent_confounder = false;     // draw U ~ N(0,1); never exported
};

struct PoSubject {
  std::vector<double> x;
  double u = 0.0;
  int t = 0;
  int s0 = 0, s1 = 0;
  double y0 = 0.0, y1 = 0.0;
  std::array<std::vector<double>, 2> z;  // full latent paths per arm, K-1 each
  std::array<int, 2> drop_stage{0, 0};   // 0 = completes; else first event stage
  StrataLabel label() const { return label_from(s0, s1); }
};

struct PotentialOutcomeTable {
  std::vector<PoSubject> subjects;
  std::size_t n_stages = 0;
};

struct GenerateResult {
  PotentialOutcomeTable table;
  TrialDataset dataset;
};

// Deterministic in (config, seed) regardless of thread count.
GenerateResult generate(const DGPConfig& config, std::uint64_t seed);

// Observed dataset from the table: each subject's event, outcome and staged
// path equal the potential values of the assigned arm, with monotone
// truncation of staged columns and the configured outcome observability.
TrialDataset reveal(const PotentialOutcomeTable& table, const DGPConfig& config);

// Exact mean of Y(1)-Y(0) over the subjects whose stratum lies in `strata`.
double true_principal_effect(const PotentialOutcomeTable& table,
                             const std::vector<StrataLabel>& strata);

// Fraction of the table in the given strata.
double stratum_fraction(const PotentialOutcomeTable& table,
                        const std::vector<StrataLabel>& strata);

struct Preset {
  DGPConfig config;
  DGPConfig violated;              // same design with one assumption broken
  std::string violated_assumption; // which one, in words
};

// Named designs: iv_compliance, gbh_monotone, pi_baseline,
// crossworld_independent, staged_qu, confounded_obs.
Preset preset(const std::string& name);
std::vector<std::string> preset_names();

// Observed-schema CSV with s0,s1,y0,y1 appended.
std::string table_to_csv_text(const PotentialOutcomeTable& table, const DGPConfig& config);
void write_table_csv(const PotentialOutcomeTable& table, const DGPConfig& config,
                     const std::string& path);

} // namespace pstrat
