#pragma once

#include <cstdint>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/report.hpp"

namespace pstrat {

// Binary-outcome sensitivity family under S(1) <= S(0). The identified
// stratum I is {S(0)=0}; treated event-free subjects are a mixture of I and
// the stratum B that is event-free under treatment only. Each function pins
// the unidentified part with a different one-dimensional parameter and
// returns Pr(Y(1)=1 | I) as the point, with Pr(Y(0)=1 | I) and the implied
// odds ratio in sensitivity_params.

// gamma = Pr(Y(1)=1 | B).
EstimateReport binary_gamma(const TrialDataset& ds, double gamma);

// tau = Pr(Y(1)=1 | B) / Pr(Y(1)=1 | I), a risk ratio.
EstimateReport binary_tau(const TrialDataset& ds, double tau);

// Logistic membership weight Pr(I | Y(1)=y, I or B) = expit(alpha + beta*y),
// with alpha solved from the mixture normalization.
EstimateReport binary_beta(const TrialDataset& ds, double beta);

// Continuous-outcome dropout sensitivity: over a beta grid, solves the weight
// intercept alpha from the empirical normalization, computes the
// bias-corrected completer contrast T(beta) (treated minus control), and
// bootstraps percentile intervals re-solving alpha inside every replicate.
// The declared monotonicity direction decides which arm is reweighted.
SensitivityCurve gbh_continuous(const TrialDataset& ds,
                                const std::vector<double>& beta_grid,
                                std::size_t boot_B, std::uint64_t seed,
                                double level = 0.95);

// Compliance-stratum effect without monotonicity: completers contrast plus
// the bias term alpha(pi01, beta0, beta1) built from the two mixing
// proportions.
EstimateReport cace_band_no_monotonicity(const TrialDataset& ds, double pi01,
                                         double beta0, double beta1);

// Survivors contrast shifted by a user-supplied survival bias alpha.
EstimateReport sace_crude(const TrialDataset& ds, double alpha);

// Trimming bounds for the always-survivor effect under S(1) <= S(0):
// lower = observed survivor contrast, upper replaces the treated survivor
// mean with the trimmed mean of its best q = p0/p1 fraction.
BoundsReport zhang_rubin_bounds(const TrialDataset& ds);

} // namespace pstrat
