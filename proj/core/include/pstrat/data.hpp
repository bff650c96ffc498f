#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace pstrat {

// Which clinical story the intercurrent-event flag S tells. The strata
// vocabulary and the direction "S=0 is the good/identified margin" both hang
// off this.
enum class Semantic {
  treatment_taken, // S = treatment actually taken; S=0 means taking control
  adverse_event,   // S = post-randomization event (relapse, rescue, ...)
  survival,        // S = death before outcome measurement
  compliance       // S = non-compliance / treatment discontinuation
};

enum class Monotonicity { none, s1_ge_s0, s1_le_s0 };

enum class OutcomeDirection { higher_is_better, lower_is_better };

// Principal stratum (S(0), S(1)) = (i, j), written S_ij.
enum class StrataLabel : int { S00 = 0, S01 = 1, S10 = 2, S11 = 3 };

inline int s0_of(StrataLabel u) { return (static_cast<int>(u) >> 1) & 1; }
inline int s1_of(StrataLabel u) { return static_cast<int>(u) & 1; }
inline StrataLabel label_from(int s0, int s1) {
  return static_cast<StrataLabel>((s0 << 1) | s1);
}

struct EventCoding {
  Semantic semantic = Semantic::adverse_event;
  Monotonicity monotonicity = Monotonicity::none;

  // True for every semantic except treatment_taken: S=0 is "no event /
  // compliant / alive", the margin most estimators condition on.
  bool event_style() const { return semantic != Semantic::treatment_taken; }

  // Stratum ruled out by the declared monotonicity, if any.
  std::optional<StrataLabel> forbidden_stratum() const {
    if (monotonicity == Monotonicity::s1_ge_s0) return StrataLabel::S10;
    if (monotonicity == Monotonicity::s1_le_s0) return StrataLabel::S01;
    return std::nullopt;
  }

  std::string display_name(StrataLabel u) const;
};

EventCoding coding_from_string(const std::string& semantic,
                               const std::string& monotonicity);

// One row of a two-arm trial. Optional staged structure: stage_events holds
// S^(1)..S^(K) and intermediates holds Z^(1)..Z^(K-1), with the monotone
// truncation rule that a stage event at k blanks Z^(k..) and S^(k+1..).
struct SubjectRecord {
  std::string id;
  int trt = 0;
  int event = 0;
  std::optional<double> outcome;
  std::vector<double> baseline;
  std::vector<std::optional<int>> stage_events;
  std::vector<std::optional<std::vector<double>>> intermediates;
};

struct TrialDataset {
  std::vector<SubjectRecord> records;
  std::vector<std::string> covariate_names;              // x_<name> columns
  std::size_t n_stages = 0;                              // K (0 = unstaged)
  std::vector<std::vector<std::string>> intermediate_names; // z<k>_<name>
  EventCoding coding;
  OutcomeDirection direction = OutcomeDirection::lower_is_better;

  std::size_t n() const { return records.size(); }
  std::size_t arm_count(int t) const;
  void validate() const; // throws ValidationError on contract violations
};

// Column-name mapping for the four required CSV columns; covariates and
// staged columns are found by the x_/event_<k>/z<k>_ prefixes.
struct CsvSchema {
  std::string id = "id";
  std::string trt = "trt";
  std::string event = "event";
  std::string outcome = "y";
};

TrialDataset load_csv(const std::string& path,
                      const EventCoding& coding,
                      OutcomeDirection direction = OutcomeDirection::lower_is_better,
                      const CsvSchema& schema = {});

TrialDataset parse_csv_text(const std::string& text,
                            const EventCoding& coding,
                            OutcomeDirection direction = OutcomeDirection::lower_is_better,
                            const CsvSchema& schema = {});

void write_csv(const TrialDataset& ds, const std::string& path,
               const CsvSchema& schema = {});
std::string to_csv_text(const TrialDataset& ds, const CsvSchema& schema = {});

struct ArmSummary {
  struct Arm {
    std::size_t n = 0;
    std::size_t n_event_free = 0;
    double event_free_rate = 0.0;          // p_t
    std::size_t n_outcome_event_free = 0;
    double mean_outcome_event_free = 0.0;  // mean Y over S=0 with Y present
  };
  Arm control, treated;
};

// Per-arm sizes, event-free proportions p_t, and completer outcome means.
ArmSummary summarize_arms(const TrialDataset& ds);

} // namespace pstrat
