#pragma once

#include "pstrat/data.hpp"
#include "pstrat/report.hpp"

namespace pstrat {

// Intention-to-treat effect: mean(Y | T=1) - mean(Y | T=0). Records with a
// missing outcome are dropped and counted in meta.
EstimateReport itt_effect(const TrialDataset& ds);

// Completers-only mean difference mean(Y | T=1, S=0) - mean(Y | T=0, S=0).
// Descriptive: the two completer sets are selected post-randomization.
EstimateReport naive_completers(const TrialDataset& ds);

// Instrumental-variable estimate of the complier average effect:
// ITT / (p1 + p0 - 1), where p_t is the assignment-compliance proportion in
// arm t. Requires treatment-taken coding with no-defiers monotonicity. The
// eps floor turns a near-zero complier proportion into an error.
EstimateReport cace_iv(const TrialDataset& ds, double eps = 0.01);

} // namespace pstrat
