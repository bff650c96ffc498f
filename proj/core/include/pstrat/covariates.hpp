#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/report.hpp"

namespace pstrat {

enum class OutcomeModelKind { linear, linear_with_intermediates };

// Regression of Y on baseline covariates fit within one arm, used to predict
// the counterfactual response for subjects of the other arm. The
// intermediates variant regresses Y on (Z, X), fits a homoscedastic
// multivariate linear model for Z given X on the same arm, and predicts by
// averaging over antithetic draws of Z | X (common random numbers across
// subjects, so predictions are deterministic given the seed).
struct OutcomeModel {
  int arm = 1;
  OutcomeModelKind kind = OutcomeModelKind::linear;
  std::vector<double> coefficients;  // y-model: [intercept, x..., z...]
  double rmse = 0.0;
  std::size_t n_fit = 0;

  std::size_t n_z = 0;
  std::vector<std::vector<double>> z_coef;  // one [intercept, x...] row per z
  std::vector<double> z_chol;               // n_z x n_z lower Cholesky, row-major
  std::size_t n_draws = 200;
  std::uint64_t seed = 0;

  double predict(const std::vector<double>& x) const;
};

OutcomeModel fit_outcome_model(const TrialDataset& ds, int arm,
                               bool use_intermediates, std::uint64_t seed = 0);

// Mean of (predicted treated response - observed control response) over the
// event-free control subjects; consistent for the effect in {S(0)=0} when
// stratum membership under control is ignorable given X.
EstimateReport predicted_counterfactual_t1(const TrialDataset& ds,
                                           bool use_intermediates = false,
                                           std::uint64_t seed = 0);

// Reweights the whole treated arm by the control-arm membership model
// w0(x) = Pr(S=0 | X, T=0) to stand in for the treated mean in {S(0)=0}.
EstimateReport strata_propensity_weighted_t2(const TrialDataset& ds);

// Weighted completer contrasts that avoid monotonicity by assuming
// S(0) and S(1) independent given X. T3 reweights each arm's event-free
// subjects by the other arm's membership model; T4 reweights the full arms
// by the product of both models.
enum class NoMonoVariant { T3, T4 };
EstimateReport no_mono_weighted(const TrialDataset& ds, NoMonoVariant variant);

// Multinomial-logit model for principal stratum membership fit by EM over
// the three strata a declared monotonicity direction leaves open. The
// reference stratum's coefficient row is pinned to zero.
struct PrincipalScoreModel {
  Monotonicity direction = Monotonicity::s1_le_s0;
  std::array<StrataLabel, 3> strata{};            // ascending enum order
  std::size_t reference = 0;                      // index into strata
  std::vector<std::vector<double>> coefficients;  // 3 rows of [intercept, x...]
  std::vector<std::array<double, 3>> probabilities;  // per subject, sums to 1
  std::array<double, 3> marginal{};               // column means
  double loglik = 0.0;
  std::size_t em_iterations = 0;
  bool converged = false;

  double prob_of(std::size_t subject, StrataLabel u) const;  // 0 if ruled out
};

PrincipalScoreModel fit_principal_scores_em(const TrialDataset& ds);

// Method-of-moments contrast: the mixture arm's event-free outcomes are
// reweighted by the conditional share of the identified stratum,
// self-normalized to mean weight 1 over that cell.
EstimateReport principal_score_estimator(const TrialDataset& ds,
                                         const PrincipalScoreModel& model);

// Covariate distribution within one principal stratum, reweighting every
// subject by the supplied membership probability, next to the overall
// distribution. Continuous covariates get a weighted kernel density on a
// shared grid; covariates with few integer-valued levels get reweighted
// proportions.
struct CovariateDistribution {
  std::string covariate;
  StrataLabel stratum = StrataLabel::S00;
  bool categorical = false;

  std::vector<double> categories;
  std::vector<double> prop_stratum, prop_overall;

  std::vector<double> grid, density_stratum, density_overall;
  double bandwidth = 0.0;

  double mean_stratum = 0.0, mean_overall = 0.0;

  std::string to_csv_text() const;
};

CovariateDistribution strata_covariate_distribution(
    const TrialDataset& ds, const std::vector<std::array<double, 4>>& probs,
    StrataLabel stratum, const std::string& covariate);

} // namespace pstrat
