#include "pstrat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pstrat/errors.hpp"
#include "pstrat/numerics.hpp"
#include "pstrat/rng.hpp"

namespace pstrat {

namespace {

double dot_design(const std::vector<double>& coef, const std::vector<double>& x,
                  const char* what) {
  if (coef.size() != x.size() + 1)
    throw invalid_config(std::string(what) + ": expected " + std::to_string(x.size() + 1) +
                         " coefficients, got " + std::to_string(coef.size()));
  double v = coef[0];
  for (std::size_t j = 0; j < x.size(); ++j) v += coef[j + 1] * x[j];
  return v;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_config(const DGPConfig& cfg) {
  if (cfg.n == 0) throw invalid_config("generate: n must be positive");
  if (!(cfg.cross_world_rho >= -1.0 && cfg.cross_world_rho <= 1.0))
    throw invalid_config("generate: cross-world rho outside [-1, 1]");
  for (const auto& c : cfg.covariates) {
    if (c.kind == CovariateSpec::Kind::bernoulli && (c.a < 0.0 || c.a > 1.0))
      throw invalid_config("generate: bernoulli covariate probability outside [0, 1]");
    if (c.kind == CovariateSpec::Kind::normal && c.b < 0.0)
      throw invalid_config("generate: negative covariate sd");
  }
  if (cfg.assignment.randomized &&
      (cfg.assignment.p <= 0.0 || cfg.assignment.p >= 1.0))
    throw invalid_config("generate: randomization probability outside (0, 1)");
  if (cfg.staged) {
    if (cfg.staged->stages.empty())
      throw invalid_config("generate: staged spec has no stages");
    if (cfg.staged->y_sd < 0.0) throw invalid_config("generate: negative outcome sd");
  }
  for (const auto& o : cfg.outcomes)
    if (o.sd < 0.0) throw invalid_config("generate: negative outcome sd");
}

// Regressor vector [x, z(1..k)] used by staged models (intercept handled by
// dot_design).
std::vector<double> with_path(const std::vector<double>& x,
                              const std::vector<double>& z, std::size_t k) {
  std::vector<double> v = x;
  v.insert(v.end(), z.begin(), z.begin() + k);
  return v;
}

// Continuous pair with residual correlation rho; binary pair drawn from the
// two marginal means independently.
void draw_outcomes(const StratumOutcome& model, const std::vector<double>& x,
                   double u, double rho, bool binary, Rng& rng, double& y0,
                   double& y1) {
  const double m0 = dot_design(model.beta, x, "outcome model") + model.confounder_load * u;
  if (binary) {
    y0 = rng.bernoulli(sigmoid(m0)) ? 1.0 : 0.0;
    y1 = rng.bernoulli(sigmoid(m0 + model.delta)) ? 1.0 : 0.0;
    return;
  }
  const double e0 = rng.normal();
  const double e1 = rho * e0 + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * rng.normal();
  y0 = m0 + model.sd * e0;
  y1 = m0 + model.delta + model.sd * e1;
}

void generate_subject(const DGPConfig& cfg, std::uint64_t seed, std::size_t i,
                      PoSubject& s) {
  Rng rng(seed, i);

  s.x.resize(cfg.covariates.size());
  for (std::size_t j = 0; j < cfg.covariates.size(); ++j) {
    const auto& c = cfg.covariates[j];
    s.x[j] = c.kind == CovariateSpec::Kind::normal ? rng.normal(c.a, c.b)
                                                   : (rng.bernoulli(c.a) ? 1.0 : 0.0);
  }
  s.u = cfg.latent_confounder ? rng.normal() : 0.0;

  if (cfg.assignment.randomized) {
    s.t = rng.bernoulli(cfg.assignment.p) ? 1 : 0;
  } else {
    const double z = dot_design(cfg.assignment.logit_coef, s.x, "assignment model") +
                     cfg.assignment.confounder_load * s.u;
    s.t = rng.bernoulli(sigmoid(z)) ? 1 : 0;
  }

  if (cfg.staged) {
    const auto& sp = *cfg.staged;
    const std::size_t K = sp.stages.size();
    // Full latent intermediate path for each arm, then the outcome, then the
    // stage events (which may load on the outcome residual in violated
    // designs). Observation stops at the first event; the underlying path and
    // outcome exist regardless.
    std::array<double, 2> resid{};
    for (int arm = 0; arm < 2; ++arm) {
      auto& z = s.z[arm];
      z.resize(K > 0 ? K - 1 : 0);
      for (std::size_t k = 0; k + 1 < K; ++k) {
        const auto& st = sp.stages[k];
        const double m = dot_design(st.z_coef, with_path(s.x, z, k), "staged z model") +
                         (arm == 1 ? st.treated_z_shift : 0.0);
        z[k] = m + st.z_sd * rng.normal();
      }
      resid[arm] = rng.normal();
    }
    const double e0 = resid[0];
    const double rho = cfg.cross_world_rho;
    const double e1 = rho * e0 + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * resid[1];
    s.y0 = dot_design(sp.y_coef, with_path(s.x, s.z[0], s.z[0].size()), "staged outcome") +
           sp.y_sd * e0;
    s.y1 = dot_design(sp.y_coef, with_path(s.x, s.z[1], s.z[1].size()), "staged outcome") +
           sp.y_delta + sp.y_sd * e1;
    const std::array<double, 2> e{e0, e1};
    for (int arm = 0; arm < 2; ++arm) {
      s.drop_stage[arm] = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const auto& st = sp.stages[k];
        double lg = dot_design(st.s_coef, with_path(s.x, s.z[arm], k), "staged event model") +
                    (arm == 1 ? st.treated_s_shift : 0.0) + st.y_residual_load * e[arm];
        if (rng.bernoulli(sigmoid(lg))) {
          s.drop_stage[arm] = static_cast<int>(k) + 1;
          break;
        }
      }
    }
    s.s0 = s.drop_stage[0] > 0 ? 1 : 0;
    s.s1 = s.drop_stage[1] > 0 ? 1 : 0;
    return;
  }

  if (const auto* m = std::get_if<MechMonotoneSelection>(&cfg.mechanism)) {
    draw_outcomes(cfg.outcomes[0], s.x, s.u, cfg.cross_world_rho, cfg.binary_outcome,
                  rng, s.y0, s.y1);
    const double p_event = sigmoid(dot_design(m->event_coef, s.x, "event model"));
    if (m->direction == Monotonicity::s1_le_s0) {
      s.s1 = rng.bernoulli(p_event) ? 1 : 0;
      s.s0 = s.s1 == 1 ? 1
                       : (rng.bernoulli(sigmoid(m->alpha + m->beta * s.y1)) ? 0 : 1);
    } else if (m->direction == Monotonicity::s1_ge_s0) {
      s.s0 = rng.bernoulli(p_event) ? 1 : 0;
      s.s1 = s.s0 == 1 ? 1
                       : (rng.bernoulli(sigmoid(m->alpha + m->beta * s.y0)) ? 0 : 1);
    } else {
      throw invalid_config("generate: monotone mechanism needs a direction");
    }
    return;
  }

  StrataLabel u_lbl;
  if (const auto* m = std::get_if<MechMultinomialLogit>(&cfg.mechanism)) {
    std::vector<double> lg(4);
    for (int k = 0; k < 4; ++k)
      lg[k] = dot_design(m->eta[k], s.x, "strata logit") + m->confounder_load[k] * s.u;
    const double top = *std::max_element(lg.begin(), lg.end());
    std::vector<double> w(4);
    for (int k = 0; k < 4; ++k) w[k] = std::exp(lg[k] - top);
    u_lbl = static_cast<StrataLabel>(rng.categorical(w));
  } else if (const auto* m = std::get_if<MechIndependent>(&cfg.mechanism)) {
    const int s0 = rng.bernoulli(sigmoid(dot_design(m->s0_coef, s.x, "S(0) model"))) ? 1 : 0;
    const int s1 = rng.bernoulli(sigmoid(dot_design(m->s1_coef, s.x, "S(1) model") +
                                         m->s0_in_s1 * s0))
                       ? 1
                       : 0;
    u_lbl = label_from(s0, s1);
  } else {
    const auto& mc = std::get<MechExclusionCompliance>(cfg.mechanism);
    std::vector<double> lg(4);
    lg[static_cast<int>(StrataLabel::S00)] = dot_design(mc.never_coef, s.x, "never-taker logit");
    lg[static_cast<int>(StrataLabel::S01)] = 0.0; // complier reference
    lg[static_cast<int>(StrataLabel::S10)] = mc.defier_logit;
    lg[static_cast<int>(StrataLabel::S11)] = dot_design(mc.always_coef, s.x, "always-taker logit");
    const double top = *std::max_element(lg.begin(), lg.end());
    std::vector<double> w(4);
    for (int k = 0; k < 4; ++k) w[k] = std::exp(lg[k] - top);
    u_lbl = static_cast<StrataLabel>(rng.categorical(w));
  }

  s.s0 = s0_of(u_lbl);
  s.s1 = s1_of(u_lbl);
  draw_outcomes(cfg.outcomes[static_cast<int>(u_lbl)], s.x, s.u, cfg.cross_world_rho,
                cfg.binary_outcome, rng, s.y0, s.y1);
  if (std::holds_alternative<MechExclusionCompliance>(cfg.mechanism) &&
      (u_lbl == StrataLabel::S00 || u_lbl == StrataLabel::S11)) {
    s.y1 = s.y0; // assignment cannot move the outcome without moving treatment
  }
}

std::string subject_id(std::size_t i, std::size_t n) {
  int width = 1;
  for (std::size_t v = n; v >= 10; v /= 10) ++width;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%0*zu", width, i + 1);
  return buf;
}

} // namespace

TrialDataset reveal(const PotentialOutcomeTable& table, const DGPConfig& cfg) {
  TrialDataset ds;
  ds.coding = cfg.coding;
  ds.direction = cfg.direction;
  for (std::size_t j = 0; j < cfg.covariates.size(); ++j) {
    const auto& nm = cfg.covariates[j].name;
    ds.covariate_names.push_back(nm.empty() ? "x" + std::to_string(j + 1) : nm);
  }
  ds.n_stages = table.n_stages;
  for (std::size_t k = 0; k + 1 < table.n_stages; ++k)
    ds.intermediate_names.push_back({"z" + std::to_string(k + 1)});

  ds.records.reserve(table.subjects.size());
  for (std::size_t i = 0; i < table.subjects.size(); ++i) {
    const auto& s = table.subjects[i];
    SubjectRecord r;
    r.id = subject_id(i, table.subjects.size());
    r.trt = s.t;
    r.baseline = s.x;
    const int ev = s.t == 1 ? s.s1 : s.s0;
    r.event = ev;
    if (table.n_stages > 0) {
      const int drop = s.drop_stage[s.t];
      r.stage_events.assign(table.n_stages, std::nullopt);
      for (std::size_t k = 0; k < table.n_stages; ++k) {
        const int stage = static_cast<int>(k) + 1;
        if (drop == 0 || stage < drop)
          r.stage_events[k] = 0;
        else if (stage == drop)
          r.stage_events[k] = 1;
        else
          break;
      }
      r.intermediates.assign(table.n_stages - 1, std::nullopt);
      for (std::size_t k = 0; k + 1 < table.n_stages; ++k) {
        const int stage = static_cast<int>(k) + 1;
        if (drop == 0 || stage < drop)
          r.intermediates[k] = std::vector<double>{s.z[s.t][k]};
      }
      if (drop == 0) r.outcome = s.t == 1 ? s.y1 : s.y0;
    } else {
      const bool hide = cfg.hide_outcome_on_event && ev == 1;
      if (!hide) r.outcome = s.t == 1 ? s.y1 : s.y0;
    }
    ds.records.push_back(std::move(r));
  }
  ds.validate();
  return ds;
}

GenerateResult generate(const DGPConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  PotentialOutcomeTable table;
  table.n_stages = cfg.staged ? cfg.staged->stages.size() : 0;
  table.subjects.resize(cfg.n);
  parallel_for(cfg.n, 0, [&](std::size_t i) {
    generate_subject(cfg, seed, i, table.subjects[i]);
  });
  TrialDataset ds = reveal(table, cfg);
  return {std::move(table), std::move(ds)};
}

double true_principal_effect(const PotentialOutcomeTable& table,
                             const std::vector<StrataLabel>& strata) {
  unsigned mask = 0;
  for (StrataLabel u : strata) mask |= 1u << static_cast<int>(u);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : table.subjects) {
    if (mask & (1u << static_cast<int>(s.label()))) {
      sum += s.y1 - s.y0;
      ++count;
    }
  }
  if (count == 0) throw empty_stratum("true_principal_effect: no subjects in the stratum");
  return sum / static_cast<double>(count);
}

double stratum_fraction(const PotentialOutcomeTable& table,
                        const std::vector<StrataLabel>& strata) {
  if (table.subjects.empty()) throw empty_stratum("stratum_fraction: empty table");
  unsigned mask = 0;
  for (StrataLabel u : strata) mask |= 1u << static_cast<int>(u);
  std::size_t count = 0;
  for (const auto& s : table.subjects)
    if (mask & (1u << static_cast<int>(s.label()))) ++count;
  return static_cast<double>(count) / static_cast<double>(table.subjects.size());
}

std::vector<std::string> preset_names() {
  return {"iv_compliance",  "gbh_monotone", "pi_baseline",
          "crossworld_independent", "staged_qu",    "confounded_obs"};
}

namespace {

std::vector<CovariateSpec> normal_covariates(std::size_t d) {
  std::vector<CovariateSpec> v(d);
  return v;
}

Preset make_iv_compliance() {
  Preset p;
  DGPConfig& c = p.config;
  c.n = 10000;
  c.covariates = normal_covariates(2);
  MechExclusionCompliance m;
  m.never_coef = {0.2, 0.3, -0.2};
  m.always_coef = {-0.4, 0.1, 0.4};
  c.mechanism = m;
  c.outcomes[static_cast<int>(StrataLabel::S00)] = {{0.5, 0.4, 0.2}, 0.0, 1.0, 0.0};
  c.outcomes[static_cast<int>(StrataLabel::S01)] = {{1.0, 0.5, -0.3}, 2.0, 1.0, 0.0};
  c.outcomes[static_cast<int>(StrataLabel::S10)] = {{1.0, 0.5, -0.3}, 1.0, 1.0, 0.0};
  c.outcomes[static_cast<int>(StrataLabel::S11)] = {{1.5, -0.2, 0.1}, 0.0, 1.0, 0.0};
  c.coding = {Semantic::treatment_taken, Monotonicity::s1_ge_s0};
  c.direction = OutcomeDirection::higher_is_better;
  p.violated = c;
  std::get<MechExclusionCompliance>(p.violated.mechanism).defier_logit = -0.5;
  p.violated.coding.monotonicity = Monotonicity::none;
  p.violated_assumption = "monotonicity: defiers present";
  return p;
}

Preset make_gbh_monotone() {
  Preset p;
  DGPConfig& c = p.config;
  c.n = 10000;
  c.covariates = normal_covariates(1);
  MechMonotoneSelection m;
  m.direction = Monotonicity::s1_le_s0;
  m.event_coef = {-1.2, 0.4};
  m.alpha = 0.8;
  m.beta = -1.0;
  c.mechanism = m;
  c.outcomes[0] = {{0.0, 0.6}, -0.4, 1.0, 0.0};
  c.coding = {Semantic::compliance, Monotonicity::s1_le_s0};
  c.direction = OutcomeDirection::lower_is_better;
  c.hide_outcome_on_event = true;
  p.violated = c;
  MechMultinomialLogit viol;
  viol.eta[static_cast<int>(StrataLabel::S00)] = {0.8, 0.2};
  viol.eta[static_cast<int>(StrataLabel::S01)] = {-0.4, -0.3};
  viol.eta[static_cast<int>(StrataLabel::S10)] = {0.0, 0.0};
  viol.eta[static_cast<int>(StrataLabel::S11)] = {-0.8, 0.1};
  p.violated.mechanism = viol;
  p.violated.outcomes[1] = {{0.3, 0.6}, -1.0, 1.0, 0.0};
  p.violated.outcomes[2] = {{-0.2, 0.6}, 0.2, 1.0, 0.0};
  p.violated.outcomes[3] = {{0.5, 0.6}, 0.0, 1.0, 0.0};
  p.violated_assumption = "monotonicity: forbidden stratum populated";
  return p;
}

Preset make_pi_baseline() {
  Preset p;
  DGPConfig& c = p.config;
  c.n = 10000;
  c.covariates = normal_covariates(2);
  MechMultinomialLogit m;
  m.eta[static_cast<int>(StrataLabel::S00)] = {0.5, 0.6, -0.4};
  m.eta[static_cast<int>(StrataLabel::S01)] = {-50.0, 0.0, 0.0};
  m.eta[static_cast<int>(StrataLabel::S10)] = {0.0, 0.0, 0.0};
  m.eta[static_cast<int>(StrataLabel::S11)] = {-0.3, 0.5, 0.3};
  c.mechanism = m;
  const StratumOutcome shared{{1.0, 0.8, -0.5}, -0.6, 1.0, 0.0};
  c.outcomes = {shared, shared, shared, shared};
  c.coding = {Semantic::adverse_event, Monotonicity::s1_le_s0};
  c.direction = OutcomeDirection::lower_is_better;
  p.violated = c;
  p.violated.latent_confounder = true;
  {
    auto& vm = std::get<MechMultinomialLogit>(p.violated.mechanism);
    vm.confounder_load[static_cast<int>(StrataLabel::S00)] = 1.0;
    for (auto& o : p.violated.outcomes) o.confounder_load = 0.8;
  }
  p.violated_assumption =
      "principal ignorability: unmeasured confounder of stratum and outcome";
  return p;
}

Preset make_crossworld_independent() {
  Preset p;
  DGPConfig& c = p.config;
  c.n = 10000;
  c.covariates = normal_covariates(2);
  MechIndependent m;
  m.s0_coef = {-0.4, 0.5, -0.3};
  m.s1_coef = {-0.8, 0.3, 0.4};
  c.mechanism = m;
  const StratumOutcome shared{{0.5, 0.7, -0.6}, -0.5, 1.0, 0.0};
  c.outcomes = {shared, shared, shared, shared};
  c.coding = {Semantic::adverse_event, Monotonicity::none};
  c.direction = OutcomeDirection::lower_is_better;
  p.violated = c;
  std::get<MechIndependent>(p.violated.mechanism).s0_in_s1 = 1.5;
  p.violated_assumption = "cross-world independence: S(1) depends on S(0) given X";
  return p;
}

Preset make_staged_qu() {
  Preset p;
  DGPConfig& c = p.config;
  c.n = 10000;
  c.covariates = normal_covariates(7);
  c.covariates[6].kind = CovariateSpec::Kind::bernoulli;
  c.covariates[6].a = 0.4;
  StagedSpec sp;
  StagedStage s1;
  s1.s_coef = {-1.6, 0.25, -0.2, 0.15, 0.1, -0.15, 0.2, 0.3};
  s1.treated_s_shift = -0.3;
  s1.z_coef = {0.5, 0.4, -0.3, 0.2, -0.1, 0.15, -0.2, 0.25};
  s1.z_sd = 1.0;
  s1.treated_z_shift = 0.6;
  StagedStage s2;
  s2.s_coef = {-1.8, 0.2, -0.15, 0.1, 0.05, -0.1, 0.15, 0.25, 0.5};
  s2.treated_s_shift = -0.2;
  sp.stages = {s1, s2};
  sp.y_coef = {1.0, 0.4, -0.3, 0.25, -0.2, 0.15, -0.1, 0.2, 0.7};
  sp.y_delta = -0.5;
  sp.y_sd = 1.0;
  c.staged = sp;
  c.coding = {Semantic::compliance, Monotonicity::none};
  c.direction = OutcomeDirection::lower_is_better;
  p.violated = c;
  for (auto& st : p.violated.staged->stages) st.y_residual_load = 0.8;
  p.violated_assumption = "latent ignorability: dropout depends on the outcome residual";
  return p;
}

Preset make_confounded_obs() {
  Preset p;
  DGPConfig& c = p.config;
  c.n = 10000;
  c.covariates = normal_covariates(2);
  MechMultinomialLogit m;
  m.eta[static_cast<int>(StrataLabel::S00)] = {0.5, 0.6, -0.4};
  m.eta[static_cast<int>(StrataLabel::S01)] = {-50.0, 0.0, 0.0};
  m.eta[static_cast<int>(StrataLabel::S10)] = {0.0, 0.0, 0.0};
  m.eta[static_cast<int>(StrataLabel::S11)] = {-0.3, 0.5, 0.3};
  c.mechanism = m;
  const StratumOutcome shared{{1.0, 0.8, -0.5}, -0.6, 1.0, 0.0};
  c.outcomes = {shared, shared, shared, shared};
  c.assignment.randomized = false;
  c.assignment.logit_coef = {0.2, 0.8, -0.6};
  c.coding = {Semantic::adverse_event, Monotonicity::s1_le_s0};
  c.direction = OutcomeDirection::lower_is_better;
  p.violated = c;
  p.violated.latent_confounder = true;
  p.violated.assignment.confounder_load = 1.0;
  for (auto& o : p.violated.outcomes) o.confounder_load = 0.8;
  p.violated_assumption = "no unmeasured confounding: latent factor drives assignment and outcome";
  return p;
}

} // namespace

Preset preset(const std::string& name) {
  if (name == "iv_compliance") return make_iv_compliance();
  if (name == "gbh_monotone") return make_gbh_monotone();
  if (name == "pi_baseline") return make_pi_baseline();
  if (name == "crossworld_independent") return make_crossworld_independent();
  if (name == "staged_qu") return make_staged_qu();
  if (name == "confounded_obs") return make_confounded_obs();
  throw unknown_preset("preset: '" + name + "' is not a known design");
}

std::string table_to_csv_text(const PotentialOutcomeTable& table, const DGPConfig& cfg) {
  TrialDataset ds = reveal(table, cfg);
  std::string base = to_csv_text(ds);
  std::istringstream in(base);
  std::ostringstream out;
  std::string line;
  std::getline(in, line);
  out << line << ",s0,s1,y0,y1\n";
  char buf[64];
  for (std::size_t i = 0; i < table.subjects.size(); ++i) {
    std::getline(in, line);
    const auto& s = table.subjects[i];
    out << line << ',' << s.s0 << ',' << s.s1;
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", s.y0, s.y1);
    out << buf << '\n';
  }
  return out.str();
}

void write_table_csv(const PotentialOutcomeTable& table, const DGPConfig& cfg,
                     const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw malformed_row("cannot open '" + path + "' for writing");
  f << table_to_csv_text(table, cfg);
}

} // namespace pstrat
