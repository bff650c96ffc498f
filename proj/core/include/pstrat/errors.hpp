#pragma once

#include <stdexcept>
#include <string>

namespace pstrat {

// All library failures derive from Error and carry a stable kind() tag that
// callers (and the CLI's stderr/exit-code mapping) can match on without
// parsing messages.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

// Input/validation problems: bad files, bad configs, bad codings.
class ValidationError : public Error {
public:
  using Error::Error;
};

// Estimation-time problems: degenerate cells, failed fits, infeasible values.
class EstimationError : public Error {
public:
  using Error::Error;
};

inline ValidationError malformed_row(const std::string& msg) { return {"MalformedRow", msg}; }
inline ValidationError non_binary_treatment(const std::string& msg) { return {"NonBinaryTreatment", msg}; }
inline ValidationError inconsistent_stage_events(const std::string& msg) { return {"InconsistentStageEvents", msg}; }
inline ValidationError invalid_coding(const std::string& msg) { return {"InvalidCoding", msg}; }
inline ValidationError invalid_config(const std::string& msg) { return {"InvalidConfig", msg}; }
inline ValidationError unknown_preset(const std::string& msg) { return {"UnknownPreset", msg}; }
inline ValidationError unknown_parameter(const std::string& msg) { return {"UnknownParameter", msg}; }
inline ValidationError dimension_mismatch(const std::string& msg) { return {"DimensionMismatch", msg}; }
inline ValidationError unknown_stratum(const std::string& msg) { return {"UnknownStratum", msg}; }

inline EstimationError empty_arm(const std::string& msg) { return {"EmptyArm", msg}; }
inline EstimationError empty_stratum_cell(const std::string& msg) { return {"EmptyStratumCell", msg}; }
inline EstimationError empty_stratum(const std::string& msg) { return {"EmptyStratum", msg}; }
inline EstimationError separation(const std::string& msg) { return {"Separation", msg}; }
inline EstimationError rank_deficient(const std::string& msg) { return {"RankDeficient", msg}; }
inline EstimationError no_bracket(const std::string& msg) { return {"NoBracket", msg}; }
inline EstimationError statistic_failed(const std::string& msg) { return {"StatisticFailed", msg}; }
inline EstimationError degenerate_support(const std::string& msg) { return {"DegenerateSupport", msg}; }
inline EstimationError positivity_violation(const std::string& msg) { return {"PositivityViolation", msg}; }
inline EstimationError probability_out_of_range(const std::string& msg) { return {"ProbabilityOutOfRange", msg}; }
inline EstimationError infeasible_pi01(const std::string& msg) { return {"InfeasiblePi01", msg}; }
inline EstimationError monotonicity_inconsistent(const std::string& msg) { return {"MonotonicityInconsistent", msg}; }
inline EstimationError model_fit_failed(const std::string& msg) { return {"ModelFitFailed", msg}; }
inline EstimationError degenerate_weights(const std::string& msg) { return {"DegenerateWeights", msg}; }
inline EstimationError all_zero_probabilities(const std::string& msg) { return {"AllZeroProbabilities", msg}; }
inline EstimationError stage_data_missing(const std::string& msg) { return {"StageDataMissing", msg}; }
inline EstimationError integration_unstable(const std::string& msg) { return {"IntegrationUnstable", msg}; }
inline EstimationError prior_support_violation(const std::string& msg) { return {"PriorSupportViolation", msg}; }
inline EstimationError non_finite_likelihood(const std::string& msg) { return {"NonFiniteLikelihood", msg}; }

} // namespace pstrat
