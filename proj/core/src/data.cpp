#include "pstrat/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "pstrat/errors.hpp"

namespace pstrat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  return ec == std::errc() && ptr == e;
}

bool parse_int01(const std::string& s, int& v) {
  if (s == "0") { v = 0; return true; }
  if (s == "1") { v = 1; return true; }
  return false;
}

struct ColumnPlan {
  int id = -1, trt = -1, event = -1, outcome = -1;
  std::vector<std::pair<int, std::string>> covariates;          // column, name
  std::vector<int> stage_event_cols;                            // index k-1 -> column
  std::vector<std::vector<std::pair<int, std::string>>> z_cols; // stage k-1 -> columns
};

ColumnPlan plan_columns(const std::vector<std::string>& header, const CsvSchema& schema) {
  ColumnPlan plan;
  std::vector<std::pair<int, int>> stage_events; // (k, column)
  std::vector<std::tuple<int, int, std::string>> zs; // (k, column, name)

  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    const int col = static_cast<int>(c);
    if (h == schema.id) { plan.id = col; continue; }
    if (h == schema.trt) { plan.trt = col; continue; }
    if (h == schema.event) { plan.event = col; continue; }
    if (h == schema.outcome) { plan.outcome = col; continue; }
    if (h.rfind("x_", 0) == 0 && h.size() > 2) {
      plan.covariates.emplace_back(col, h.substr(2));
      continue;
    }
    if (h.rfind("event_", 0) == 0) {
      int k;
      auto body = h.substr(6);
      if (!body.empty() && std::all_of(body.begin(), body.end(), ::isdigit)) {
        k = std::stoi(body);
        if (k >= 1) { stage_events.emplace_back(k, col); continue; }
      }
      throw malformed_row("bad stage event column '" + h + "'");
    }
    if (h.size() > 1 && h[0] == 'z' && ::isdigit(h[1])) {
      std::size_t i = 1;
      while (i < h.size() && ::isdigit(h[i])) ++i;
      if (i < h.size() && h[i] == '_' && i + 1 < h.size()) {
        int k = std::stoi(h.substr(1, i - 1));
        if (k >= 1) { zs.emplace_back(k, col, h.substr(i + 1)); continue; }
      }
      throw malformed_row("bad intermediate column '" + h + "'");
    }
    throw malformed_row("unrecognized column '" + h + "'");
  }

  if (plan.id < 0 || plan.trt < 0 || plan.event < 0 || plan.outcome < 0)
    throw malformed_row("header must contain columns '" + schema.id + "', '" + schema.trt +
                        "', '" + schema.event + "', '" + schema.outcome + "'");

  if (!stage_events.empty()) {
    std::sort(stage_events.begin(), stage_events.end());
    for (std::size_t i = 0; i < stage_events.size(); ++i) {
      if (stage_events[i].first != static_cast<int>(i) + 1)
        throw malformed_row("stage event columns must be contiguous event_1..event_K");
      plan.stage_event_cols.push_back(stage_events[i].second);
    }
  }
  if (!zs.empty()) {
    if (stage_events.empty())
      throw malformed_row("z<k>_ columns require event_1..event_K columns");
    int max_k = 0;
    for (auto& [k, col, name] : zs) max_k = std::max(max_k, k);
    if (max_k > static_cast<int>(plan.stage_event_cols.size()) - 1)
      throw malformed_row("intermediate stage index exceeds K-1");
    plan.z_cols.resize(plan.stage_event_cols.size() - 1);
    std::stable_sort(zs.begin(), zs.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    for (auto& [k, col, name] : zs) plan.z_cols[k - 1].emplace_back(col, name);
  } else if (!stage_events.empty() && plan.stage_event_cols.size() > 1) {
    plan.z_cols.resize(plan.stage_event_cols.size() - 1);
  }
  return plan;
}

} // namespace

std::string EventCoding::display_name(StrataLabel u) const {
  static const char* table1[] = {"Never-takers", "Compliers", "Defiers", "Always-takers"};
  static const char* table2[] = {"Immune", "Harmed", "Benefiters", "Doomed"};
  static const char* table3[] = {"Always-survivors", "Control-only-survivors",
                                 "Experimental-only-survivors", "Doomed"};
  static const char* table4[] = {"Always-compliers", "Control-only-compliers",
                                 "Experimental-only-compliers", "Never-compliers"};
  const int i = static_cast<int>(u);
  switch (semantic) {
    case Semantic::treatment_taken: return table1[i];
    case Semantic::adverse_event: return table2[i];
    case Semantic::survival: return table3[i];
    case Semantic::compliance: return table4[i];
  }
  return "S" + std::to_string(s0_of(u)) + std::to_string(s1_of(u));
}

EventCoding coding_from_string(const std::string& semantic, const std::string& monotonicity) {
  EventCoding c;
  if (semantic == "treatment_taken") c.semantic = Semantic::treatment_taken;
  else if (semantic == "adverse_event") c.semantic = Semantic::adverse_event;
  else if (semantic == "survival") c.semantic = Semantic::survival;
  else if (semantic == "compliance") c.semantic = Semantic::compliance;
  else throw invalid_coding("unknown semantic '" + semantic + "'");
  if (monotonicity == "none") c.monotonicity = Monotonicity::none;
  else if (monotonicity == "s1_ge_s0") c.monotonicity = Monotonicity::s1_ge_s0;
  else if (monotonicity == "s1_le_s0") c.monotonicity = Monotonicity::s1_le_s0;
  else throw invalid_coding("unknown monotonicity '" + monotonicity + "'");
  return c;
}

std::size_t TrialDataset::arm_count(int t) const {
  std::size_t k = 0;
  for (const auto& r : records) k += (r.trt == t);
  return k;
}

void TrialDataset::validate() const {
  for (const auto& r : records) {
    if (r.trt != 0 && r.trt != 1)
      throw non_binary_treatment("subject '" + r.id + "' has trt=" + std::to_string(r.trt));
    if (r.event != 0 && r.event != 1)
      throw malformed_row("subject '" + r.id + "' has non-binary event");
    if (r.baseline.size() != covariate_names.size())
      throw dimension_mismatch("subject '" + r.id + "' has " + std::to_string(r.baseline.size()) +
                               " covariates, expected " + std::to_string(covariate_names.size()));
    if (r.stage_events.size() != n_stages)
      throw dimension_mismatch("subject '" + r.id + "' stage event count mismatch");
    if (n_stages > 0 && r.intermediates.size() + 1 != n_stages)
      throw dimension_mismatch("subject '" + r.id + "' intermediate stage count mismatch");

    if (n_stages > 0) {
      // Overall event must equal the union of non-missing stage events, and a
      // stage event truncates everything after it (monotone missingness).
      int any = 0;
      int first_event = -1;
      for (std::size_t k = 0; k < n_stages; ++k) {
        if (!r.stage_events[k].has_value()) continue;
        int s = *r.stage_events[k];
        if (s != 0 && s != 1)
          throw malformed_row("subject '" + r.id + "' has non-binary stage event");
        if (first_event >= 0)
          throw inconsistent_stage_events("subject '" + r.id +
                                          "': stage events present after an event");
        if (s == 1) { any = 1; first_event = static_cast<int>(k); }
      }
      if (any != r.event)
        throw inconsistent_stage_events("subject '" + r.id +
                                        "': event flag disagrees with stage events");
      if (first_event >= 0) {
        for (std::size_t k = first_event; k < r.intermediates.size(); ++k)
          if (r.intermediates[k].has_value())
            throw inconsistent_stage_events("subject '" + r.id +
                                            "': intermediates present at/after the event stage");
        if (r.outcome.has_value())
          throw inconsistent_stage_events("subject '" + r.id +
                                          "': outcome present despite a stage event");
      }
      for (std::size_t k = 0; k < r.intermediates.size(); ++k)
        if (r.intermediates[k].has_value() &&
            r.intermediates[k]->size() != intermediate_names[k].size())
          throw dimension_mismatch("subject '" + r.id + "' stage " + std::to_string(k + 1) +
                                   " intermediate width mismatch");
    }
  }
}

TrialDataset parse_csv_text(const std::string& text, const EventCoding& coding,
                            OutcomeDirection direction, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw malformed_row("empty input");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const auto header = split_line(line);
  const auto plan = plan_columns(header, schema);

  TrialDataset ds;
  ds.coding = coding;
  ds.direction = direction;
  for (auto& [col, name] : plan.covariates) ds.covariate_names.push_back(name);
  ds.n_stages = plan.stage_event_cols.size();
  for (auto& stage : plan.z_cols) {
    std::vector<std::string> names;
    for (auto& [col, name] : stage) names.push_back(name);
    ds.intermediate_names.push_back(names);
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto f = split_line(line);
    if (f.size() != header.size())
      throw malformed_row("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " fields, got " +
                          std::to_string(f.size()));
    SubjectRecord r;
    r.id = f[plan.id];
    if (!parse_int01(f[plan.trt], r.trt))
      throw non_binary_treatment("line " + std::to_string(line_no) + ": trt='" + f[plan.trt] + "'");
    if (!parse_int01(f[plan.event], r.event))
      throw malformed_row("line " + std::to_string(line_no) + ": event='" + f[plan.event] + "'");
    if (!f[plan.outcome].empty()) {
      double y;
      if (!parse_double(f[plan.outcome], y))
        throw malformed_row("line " + std::to_string(line_no) + ": bad outcome '" +
                            f[plan.outcome] + "'");
      r.outcome = y;
    }
    for (auto& [col, name] : plan.covariates) {
      if (f[col].empty()) {
        r.baseline.push_back(kNaN);
      } else {
        double v;
        if (!parse_double(f[col], v))
          throw malformed_row("line " + std::to_string(line_no) + ": bad covariate '" + f[col] + "'");
        r.baseline.push_back(v);
      }
    }
    for (int col : plan.stage_event_cols) {
      if (f[col].empty()) {
        r.stage_events.push_back(std::nullopt);
      } else {
        int s;
        if (!parse_int01(f[col], s))
          throw malformed_row("line " + std::to_string(line_no) + ": bad stage event '" + f[col] + "'");
        r.stage_events.push_back(s);
      }
    }
    for (const auto& stage : plan.z_cols) {
      std::size_t present = 0;
      std::vector<double> z;
      for (auto& [col, name] : stage) {
        if (!f[col].empty()) {
          double v;
          if (!parse_double(f[col], v))
            throw malformed_row("line " + std::to_string(line_no) + ": bad intermediate '" + f[col] + "'");
          z.push_back(v);
          ++present;
        }
      }
      if (present == 0) {
        r.intermediates.push_back(std::nullopt);
      } else if (present == stage.size()) {
        r.intermediates.push_back(z);
      } else {
        throw malformed_row("line " + std::to_string(line_no) +
                            ": partially missing intermediate vector");
      }
    }
    ds.records.push_back(std::move(r));
  }
  ds.validate();
  return ds;
}

TrialDataset load_csv(const std::string& path, const EventCoding& coding,
                      OutcomeDirection direction, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_config("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_text(buf.str(), coding, direction, schema);
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

std::string to_csv_text(const TrialDataset& ds, const CsvSchema& schema) {
  std::ostringstream out;
  out << schema.id << ',' << schema.trt << ',' << schema.event << ',' << schema.outcome;
  for (const auto& name : ds.covariate_names) out << ",x_" << name;
  for (std::size_t k = 1; k <= ds.n_stages; ++k) out << ",event_" << k;
  for (std::size_t k = 0; k < ds.intermediate_names.size(); ++k)
    for (const auto& name : ds.intermediate_names[k]) out << ",z" << (k + 1) << '_' << name;
  out << '\n';
  for (const auto& r : ds.records) {
    out << r.id << ',' << r.trt << ',' << r.event << ','
        << (r.outcome ? fmt(*r.outcome) : "");
    for (double v : r.baseline) out << ',' << fmt(v);
    for (const auto& s : r.stage_events) out << ',' << (s ? std::to_string(*s) : "");
    for (std::size_t k = 0; k < ds.intermediate_names.size(); ++k) {
      const auto& z = k < r.intermediates.size() ? r.intermediates[k] : std::nullopt;
      for (std::size_t j = 0; j < ds.intermediate_names[k].size(); ++j)
        out << ',' << (z ? fmt((*z)[j]) : "");
    }
    out << '\n';
  }
  return out.str();
}

void write_csv(const TrialDataset& ds, const std::string& path, const CsvSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_config("cannot write '" + path + "'");
  out << to_csv_text(ds, schema);
}

ArmSummary summarize_arms(const TrialDataset& ds) {
  ArmSummary s;
  for (const auto& r : ds.records) {
    auto& arm = r.trt == 1 ? s.treated : s.control;
    arm.n += 1;
    if (r.event == 0) {
      arm.n_event_free += 1;
      if (r.outcome) {
        arm.n_outcome_event_free += 1;
        arm.mean_outcome_event_free += *r.outcome;
      }
    }
  }
  if (s.control.n == 0) throw empty_arm("control arm is empty");
  if (s.treated.n == 0) throw empty_arm("treated arm is empty");
  for (auto* arm : {&s.control, &s.treated}) {
    arm->event_free_rate = static_cast<double>(arm->n_event_free) / arm->n;
    arm->mean_outcome_event_free = arm->n_outcome_event_free
        ? arm->mean_outcome_event_free / arm->n_outcome_event_free
        : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

} // namespace pstrat
