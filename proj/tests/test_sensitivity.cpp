#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/errors.hpp"
#include "pstrat/estimators.hpp"
#include "pstrat/numerics.hpp"
#include "pstrat/oracle.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/sensitivity.hpp"

using namespace pstrat;

namespace {

// Binary trial from cell counts: per arm, (n, event-free, events-free with
// y=1). Everyone with the event keeps y=0 (unused by the estimators).
TrialDataset binary_trial(std::size_t n0, std::size_t free0, std::size_t y0_ones,
                          std::size_t n1, std::size_t free1, std::size_t y1_ones,
                          EventCoding coding = {Semantic::adverse_event,
                                                Monotonicity::s1_le_s0}) {
  TrialDataset ds;
  ds.coding = coding;
  int k = 0;
  auto add_arm = [&](int arm, std::size_t n, std::size_t nfree, std::size_t ones) {
    for (std::size_t i = 0; i < n; ++i) {
      SubjectRecord r;
      r.id = "b" + std::to_string(k++);
      r.trt = arm;
      r.event = i < nfree ? 0 : 1;
      r.outcome = (i < nfree && i < ones) ? 1.0 : 0.0;
      ds.records.push_back(r);
    }
  };
  add_arm(0, n0, free0, y0_ones);
  add_arm(1, n1, free1, y1_ones);
  return ds;
}

} // namespace

TEST_CASE("the three binary parameterizations agree at their null points") {
  // p0 = 0.6, p1 = 0.8, Phat = 0.5, PI = 0.75
  auto ds = binary_trial(100, 60, 24, 100, 80, 40);
  const double phat = 0.5;
  auto g = binary_gamma(ds, phat); // gamma at the plug-in value
  auto t = binary_tau(ds, 1.0);
  auto b = binary_beta(ds, 0.0);
  CHECK(std::abs(g.point - phat) < 1e-10);
  CHECK(std::abs(t.point - phat) < 1e-10);
  CHECK(std::abs(b.point - phat) < 1e-10);
  CHECK(std::abs(g.sensitivity_params.at("or_identified") -
                 t.sensitivity_params.at("or_identified")) < 1e-10);
  CHECK(std::abs(t.sensitivity_params.at("or_identified") -
                 b.sensitivity_params.at("or_identified")) < 1e-10);
}

TEST_CASE("binary gamma handles the empty-benefiter edge and infeasible values") {
  // p0 = p1 -> PI = 1, no benefiters: any gamma returns the plug-in
  auto ds_eq = binary_trial(50, 30, 12, 50, 30, 21);
  CHECK(binary_gamma(ds_eq, 0.9).point == doctest::Approx(0.7).epsilon(1e-12));

  // PI = 0.3, Phat = 0.2: gamma = 1 drives the expression negative
  auto ds_small = binary_trial(100, 24, 10, 100, 80, 16);
  CHECK_THROWS_WITH_AS(binary_gamma(ds_small, 1.0),
                       doctest::Contains("ProbabilityOutOfRange"), EstimationError);
  CHECK_THROWS_WITH_AS(binary_gamma(ds_eq, 1.5), doctest::Contains("InvalidConfig"),
                       ValidationError);
}

TEST_CASE("binary tau collapses at 1 and vanishes as tau grows") {
  auto ds = binary_trial(100, 60, 24, 100, 80, 40);
  CHECK(binary_tau(ds, 1.0).point == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(binary_tau(ds, 1e9).point < 1e-8);
  CHECK_THROWS_WITH_AS(binary_tau(ds, 0.0), doctest::Contains("InvalidConfig"),
                       ValidationError);
}

TEST_CASE("binary beta matches the constant-weight case and orders by sign") {
  auto ds = binary_trial(100, 60, 24, 100, 80, 40);
  const double at0 = binary_beta(ds, 0.0).point;
  CHECK(at0 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(binary_beta(ds, -0.5).point <= at0);
  CHECK(binary_beta(ds, -2.0).point <= binary_beta(ds, -0.5).point);
  CHECK(binary_beta(ds, 1.0).point >= at0);
  // the recorded alpha satisfies the normalization
  auto rep = binary_beta(ds, -1.3);
  const double a = rep.sensitivity_params.at("alpha");
  const double pi = rep.sensitivity_params.at("pi_identified");
  auto expit = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double resid = (expit(a) * 0.5 + expit(a - 1.3) * 0.5) / pi - 1.0;
  CHECK(std::abs(resid) < 1e-8);
}

TEST_CASE("binary estimators recover enumerated stratum risks on oracle data") {
  DGPConfig c;
  c.n = 20000;
  c.covariates = {{}};
  MechMonotoneSelection m;
  m.direction = Monotonicity::s1_le_s0;
  m.event_coef = {-0.6, 0.3};
  m.alpha = 0.3;
  m.beta = -1.2;
  c.mechanism = m;
  c.outcomes[0] = {{-0.2, 0.4}, 0.9, 1.0, 0.0};
  c.binary_outcome = true;
  c.coding = {Semantic::adverse_event, Monotonicity::s1_le_s0};
  auto g = generate(c, 404);

  // enumerate Pr(Y(1)=1 | I) and Pr(Y(1)=1 | B) from the table
  double i_n = 0, i_k = 0, b_n = 0, b_k = 0;
  for (const auto& s : g.table.subjects) {
    if (s.label() == StrataLabel::S00) {
      ++i_n;
      i_k += s.y1;
    } else if (s.label() == StrataLabel::S10) {
      ++b_n;
      b_k += s.y1;
    }
  }
  const double truth_i = i_k / i_n;
  const double truth_b = b_k / b_n;

  SUBCASE("gamma at the true benefiter risk") {
    auto rep = binary_gamma(g.dataset, truth_b);
    const double se =
        bootstrap(g.dataset,
                  [&](const TrialDataset& d) { return binary_gamma(d, truth_b).point; },
                  300, 5, 0.95, true, 0, true)
            .se;
    CHECK(std::abs(rep.point - truth_i) < 3.0 * se);
  }
  SUBCASE("tau at the true risk ratio") {
    const double tau_true = truth_b / truth_i;
    auto rep = binary_tau(g.dataset, tau_true);
    const double se =
        bootstrap(g.dataset,
                  [&](const TrialDataset& d) { return binary_tau(d, tau_true).point; },
                  300, 6, 0.95, true, 0, true)
            .se;
    CHECK(std::abs(rep.point - truth_i) < 3.0 * se);
  }
  SUBCASE("beta at the generating selection slope") {
    auto rep = binary_beta(g.dataset, -1.2);
    const double se =
        bootstrap(g.dataset,
                  [&](const TrialDataset& d) { return binary_beta(d, -1.2).point; },
                  300, 7, 0.95, true, 0, true)
            .se;
    CHECK(std::abs(rep.point - truth_i) < 3.0 * se);
  }
}

TEST_CASE("gbh at beta zero reproduces the naive completer contrast") {
  auto p = preset("gbh_monotone");
  p.config.n = 4000;
  auto g = generate(p.config, 55);
  auto curve = gbh_continuous(g.dataset, {-1.0, -0.5, 0.0}, 0, 1);
  REQUIRE(curve.points.size() == 3);
  const double naive = naive_completers(g.dataset).point;
  CHECK(std::abs(curve.points[2].estimate - naive) < 1e-10);
}

TEST_CASE("gbh alpha solutions satisfy the empirical normalization") {
  auto p = preset("gbh_monotone");
  p.config.n = 3000;
  auto g = generate(p.config, 56);
  auto curve = gbh_continuous(g.dataset, {-1.5, -1.0, -0.5, 0.0, 0.5}, 0, 1);
  // recompute the residual directly from the data
  std::vector<double> y_mix;
  std::size_t n1 = 0, free1 = 0, n0 = 0, free0 = 0;
  for (const auto& r : g.dataset.records) {
    if (r.trt == 1) {
      ++n1;
      if (r.event == 0) {
        ++free1;
        y_mix.push_back(*r.outcome); // weights fall on the treated arm here
      }
    } else {
      ++n0;
      free0 += r.event == 0;
    }
  }
  const double pi = (static_cast<double>(free0) / n0) / (static_cast<double>(free1) / n1);
  auto expit = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (const auto& pt : curve.points) {
    REQUIRE(pt.warnings.empty());
    double s = 0.0;
    for (double y : y_mix) s += expit(pt.alpha + pt.param * y);
    CHECK(std::abs(s / (static_cast<double>(y_mix.size()) * pi) - 1.0) < 1e-8);
  }
}

TEST_CASE("gbh shrinks the effect as selection strengthens on a favorable outcome") {
  // control-weighted design: dropping is likelier under control, lower
  // outcomes are better, treatment lowers the outcome
  DGPConfig c;
  c.n = 20000;
  c.covariates = {{}};
  MechMonotoneSelection m;
  m.direction = Monotonicity::s1_ge_s0;
  m.event_coef = {-1.0, 0.3};
  m.alpha = 0.5;
  m.beta = -0.8;
  c.mechanism = m;
  c.outcomes[0] = {{0.5, 0.7}, -2.0, 1.0, 0.0};
  c.coding = {Semantic::compliance, Monotonicity::s1_ge_s0};
  c.direction = OutcomeDirection::lower_is_better;
  c.hide_outcome_on_event = true;
  auto g = generate(c, 57);

  std::vector<double> grid;
  for (double b = -1.5; b <= 0.0 + 1e-12; b += 0.25) grid.push_back(b);
  auto curve = gbh_continuous(g.dataset, grid, 0, 1);
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    REQUIRE(curve.points[i].warnings.empty());
    CHECK(std::abs(curve.points[i].estimate) <=
          std::abs(curve.points[i + 1].estimate) + 1e-12);
  }

  // spot-check one point against a direct reweighted-mean computation
  const auto& pt = curve.points[1];
  std::vector<double> y_ctl;
  std::size_t n1 = 0, free1 = 0, n0 = 0, free0 = 0;
  double treated_sum = 0.0;
  std::size_t treated_n = 0;
  for (const auto& r : g.dataset.records) {
    if (r.trt == 0) {
      ++n0;
      if (r.event == 0) {
        ++free0;
        y_ctl.push_back(*r.outcome);
      }
    } else {
      ++n1;
      if (r.event == 0) {
        ++free1;
        treated_sum += *r.outcome;
        ++treated_n;
      }
    }
  }
  const double pi = (static_cast<double>(free1) / n1) / (static_cast<double>(free0) / n0);
  auto expit = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  double wy = 0.0;
  for (double y : y_ctl) wy += expit(pt.alpha + pt.param * y) * y;
  const double direct =
      treated_sum / static_cast<double>(treated_n) -
      wy / (static_cast<double>(y_ctl.size()) * pi);
  CHECK(pt.estimate == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("gbh reports infeasible grid points and keeps going") {
  // control-weighted coding but the control arm retains more subjects, so
  // the mixture share is impossible for every beta
  std::vector<int> trt, ev;
  std::vector<double> y;
  Rng rng(3, 0);
  for (int i = 0; i < 200; ++i) {
    trt.push_back(i % 2);
    const bool treated = i % 2 == 1;
    ev.push_back(treated ? (i % 10 == 1) : (i % 10 < 5)); // 10% vs 50% events
    y.push_back(rng.normal());
  }
  TrialDataset ds;
  ds.coding = {Semantic::compliance, Monotonicity::s1_ge_s0};
  for (std::size_t i = 0; i < trt.size(); ++i) {
    SubjectRecord r;
    r.id = "g" + std::to_string(i);
    r.trt = trt[i];
    r.event = ev[i];
    if (ev[i] == 0) r.outcome = y[i];
    ds.records.push_back(r);
  }
  auto curve = gbh_continuous(ds, {-1.0, 0.0, 1.0}, 0, 1);
  REQUIRE(curve.points.size() == 3);
  for (const auto& pt : curve.points) {
    CHECK(std::isnan(pt.estimate));
    REQUIRE(!pt.warnings.empty());
    CHECK(pt.warnings[0].find("NoBracket") != std::string::npos);
  }
}

TEST_CASE("gbh bootstrap intervals re-solve the weight intercept per replicate") {
  auto p = preset("gbh_monotone");
  p.config.n = 2000;
  auto g = generate(p.config, 58);
  set_max_threads(1);
  auto curve = gbh_continuous(g.dataset, {-1.0, 0.0}, 200, 42);
  for (const auto& pt : curve.points) {
    REQUIRE(pt.ci.has_value());
    CHECK(pt.ci->low <= pt.ci->high);
    CHECK(pt.ci->contains(pt.estimate));
  }
  // deterministic across worker counts
  set_max_threads(4);
  auto curve4 = gbh_continuous(g.dataset, {-1.0, 0.0}, 200, 42);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].ci->low == curve4.points[i].ci->low);
    CHECK(curve.points[i].ci->high == curve4.points[i].ci->high);
  }
}

TEST_CASE("compliance-stratum band is affine with the documented coefficients") {
  std::vector<int> trt, ev;
  std::vector<double> y;
  Rng rng(8, 0);
  for (int i = 0; i < 400; ++i) {
    trt.push_back(i % 2);
    ev.push_back(rng.bernoulli(i % 2 ? 0.35 : 0.25));
    y.push_back(rng.normal(1.0, 2.0));
  }
  TrialDataset ds;
  ds.coding = {Semantic::compliance, Monotonicity::none};
  for (std::size_t i = 0; i < trt.size(); ++i) {
    SubjectRecord r;
    r.id = "c" + std::to_string(i);
    r.trt = trt[i];
    r.event = ev[i];
    r.outcome = y[i];
    ds.records.push_back(r);
  }
  double pi0 = 0, pi1 = 0, n0 = 0, n1 = 0;
  for (const auto& r : ds.records) {
    if (r.trt == 1) {
      ++n1;
      pi1 += r.event == 0;
    } else {
      ++n0;
      pi0 += r.event == 0;
    }
  }
  pi0 /= n0;
  pi1 /= n1;

  const double base = cace_band_no_monotonicity(ds, 0.0, 3.7, 0.0).point;
  CHECK(base == doctest::Approx(naive_completers(ds).point).epsilon(1e-12));
  // beta0 is irrelevant when pi01 = 0
  CHECK(cace_band_no_monotonicity(ds, 0.0, -5.0, 1.0).point ==
        doctest::Approx(cace_band_no_monotonicity(ds, 0.0, 9.0, 1.0).point)
            .epsilon(1e-12));

  const double pi01 = 0.5 * std::min(pi0, 1.0 - pi1);
  for (double b0 : {-1.0, 0.5}) {
    for (double b1 : {-0.5, 2.0}) {
      const double expected =
          base + (pi01 / pi0) * b0 - ((pi1 - pi0 + pi01) / pi1) * b1;
      CHECK(cace_band_no_monotonicity(ds, pi01, b0, b1).point ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }

  CHECK_THROWS_WITH_AS(cace_band_no_monotonicity(ds, -0.01, 0, 0),
                       doctest::Contains("InfeasiblePi01"), EstimationError);
  CHECK_THROWS_WITH_AS(
      cace_band_no_monotonicity(ds, std::min(pi0, 1.0 - pi1) + 0.01, 0, 0),
      doctest::Contains("InfeasiblePi01"), EstimationError);
}

TEST_CASE("compliance-stratum band recovers the enumerated effect at true inputs") {
  DGPConfig c;
  c.n = 30000;
  c.covariates = {{}};
  MechMultinomialLogit m;
  m.eta[0] = {0.6, 0.0};
  m.eta[1] = {-0.5, 0.0};
  m.eta[2] = {-0.7, 0.0};
  m.eta[3] = {-1.0, 0.0};
  c.mechanism = m;
  c.outcomes[0] = {{1.0, 0.5}, -0.5, 1.0, 0.0};
  c.outcomes[1] = {{1.8, 0.5}, -0.2, 1.0, 0.0};
  c.outcomes[2] = {{0.4, 0.5}, 0.3, 1.0, 0.0};
  c.outcomes[3] = {{1.2, 0.5}, 0.1, 1.0, 0.0};
  c.coding = {Semantic::compliance, Monotonicity::none};
  auto g = generate(c, 501);

  // enumerate the sensitivity inputs
  double n00 = 0, n01 = 0, n10 = 0, sum0_00 = 0, sum0_01 = 0, sum1_00 = 0, sum1_10 = 0;
  for (const auto& s : g.table.subjects) {
    switch (s.label()) {
      case StrataLabel::S00:
        ++n00;
        sum0_00 += s.y0;
        sum1_00 += s.y1;
        break;
      case StrataLabel::S01:
        ++n01;
        sum0_01 += s.y0;
        break;
      case StrataLabel::S10:
        ++n10;
        sum1_10 += s.y1;
        break;
      default:
        break;
    }
  }
  const double beta0 = sum0_01 / n01 - sum0_00 / n00;
  const double beta1 = sum1_10 / n10 - sum1_00 / n00;
  const double pi01 = n01 / static_cast<double>(g.table.subjects.size());
  const double truth = true_principal_effect(g.table, {StrataLabel::S00});

  auto rep = cace_band_no_monotonicity(g.dataset, pi01, beta0, beta1);
  const double se = bootstrap(g.dataset,
                              [&](const TrialDataset& d) {
                                return cace_band_no_monotonicity(d, pi01, beta0, beta1)
                                    .point;
                              },
                              300, 11, 0.95, true, 0, true)
                        .se;
  CHECK(std::abs(rep.point - truth) < 3.0 * se);
}

TEST_CASE("crude survivor contrast is linear in its bias parameter") {
  std::vector<int> trt, ev;
  std::vector<double> y;
  Rng rng(12, 0);
  TrialDataset ds;
  ds.coding = {Semantic::survival, Monotonicity::none};
  for (int i = 0; i < 300; ++i) {
    SubjectRecord r;
    r.id = "s" + std::to_string(i);
    r.trt = i % 2;
    r.event = rng.bernoulli(0.3);
    if (r.event == 0) r.outcome = rng.normal();
    ds.records.push_back(r);
  }
  const double naive = sace_crude(ds, 0.0).point;
  CHECK(sace_crude(ds, -0.1).point == doctest::Approx(naive + 0.1).epsilon(1e-12));
  CHECK(sace_crude(ds, 0.0).warnings.empty());
  CHECK(!sace_crude(ds, 0.2).warnings.empty());
}

TEST_CASE("crude survivor contrast hits the truth at the enumerated bias") {
  DGPConfig c;
  c.n = 30000;
  c.covariates = {{}};
  MechMonotoneSelection m;
  m.direction = Monotonicity::s1_le_s0;
  m.event_coef = {-0.8, 0.2};
  m.alpha = 0.4;
  m.beta = -0.9;
  c.mechanism = m;
  c.outcomes[0] = {{0.3, 0.5}, 0.7, 1.0, 0.0};
  c.coding = {Semantic::survival, Monotonicity::s1_le_s0};
  c.direction = OutcomeDirection::higher_is_better;
  c.hide_outcome_on_event = true;
  auto g = generate(c, 502);

  // true bias of the treated-survivor mean relative to always-survivors
  double mix_sum = 0, mix_n = 0, s00_sum = 0, s00_n = 0;
  for (const auto& s : g.table.subjects) {
    if (s.s1 == 0) {
      mix_sum += s.y1;
      ++mix_n;
    }
    if (s.s1 == 0 && s.s0 == 0) {
      s00_sum += s.y1;
      ++s00_n;
    }
  }
  const double alpha_true = mix_sum / mix_n - s00_sum / s00_n;
  const double truth = true_principal_effect(g.table, {StrataLabel::S00});

  auto rep = sace_crude(g.dataset, alpha_true);
  const double se =
      bootstrap(g.dataset,
                [&](const TrialDataset& d) { return sace_crude(d, alpha_true).point; },
                300, 13, 0.95, true, 0, true)
          .se;
  CHECK(std::abs(rep.point - truth) < 3.0 * se);
}

TEST_CASE("trimming bounds match the order-statistics example") {
  TrialDataset ds;
  ds.coding = {Semantic::survival, Monotonicity::s1_le_s0};
  ds.direction = OutcomeDirection::higher_is_better;
  int k = 0;
  auto add = [&](int trt, int event, double y) {
    SubjectRecord r;
    r.id = "z" + std::to_string(k++);
    r.trt = trt;
    r.event = event;
    if (event == 0) r.outcome = y;
    ds.records.push_back(r);
  };
  // control: 4 subjects, 1 survivor (p0 = 0.25); treated: 8, 4 survivors
  add(0, 0, 2.0);
  add(0, 1, 0);
  add(0, 1, 0);
  add(0, 1, 0);
  for (double y : {1.0, 2.0, 3.0, 4.0}) add(1, 0, y);
  for (int i = 0; i < 4; ++i) add(1, 1, 0);

  auto rep = zhang_rubin_bounds(ds);
  CHECK(rep.sensitivity_params.at("q") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.lower == doctest::Approx(2.5 - 2.0).epsilon(1e-12));
  CHECK(rep.upper == doctest::Approx(3.5 - 2.0).epsilon(1e-12));

  // lower outcomes better: the trimmed side becomes the lower end
  ds.direction = OutcomeDirection::lower_is_better;
  auto rep2 = zhang_rubin_bounds(ds);
  CHECK(rep2.lower == doctest::Approx(1.5 - 2.0).epsilon(1e-12));
  CHECK(rep2.upper == doctest::Approx(2.5 - 2.0).epsilon(1e-12));
}

TEST_CASE("trimming bounds collapse when survivor rates match and reject q > 1") {
  TrialDataset ds;
  ds.coding = {Semantic::survival, Monotonicity::s1_le_s0};
  ds.direction = OutcomeDirection::higher_is_better;
  int k = 0;
  auto add = [&](int trt, int event, double y) {
    SubjectRecord r;
    r.id = "q" + std::to_string(k++);
    r.trt = trt;
    r.event = event;
    if (event == 0) r.outcome = y;
    ds.records.push_back(r);
  };
  for (double y : {1.0, 3.0}) add(0, 0, y);
  add(0, 1, 0);
  add(0, 1, 0);
  for (double y : {2.0, 5.0}) add(1, 0, y);
  add(1, 1, 0);
  add(1, 1, 0);
  auto rep = zhang_rubin_bounds(ds);
  CHECK(rep.lower == rep.upper);

  // control survives more often than treated: inconsistent with the coding
  TrialDataset bad = ds;
  bad.records[2].event = 0;
  bad.records[2].outcome = 1.0;
  CHECK_THROWS_WITH_AS(zhang_rubin_bounds(bad),
                       doctest::Contains("MonotonicityInconsistent"), EstimationError);
}

TEST_CASE("trimming bounds bracket the enumerated survivor effect across repetitions") {
  DGPConfig c;
  c.n = 1500;
  c.covariates = {{}};
  MechMonotoneSelection m;
  m.direction = Monotonicity::s1_le_s0;
  m.event_coef = {-0.7, 0.2};
  m.alpha = 0.4;
  m.beta = 0.8; // always-survivors keep the higher outcomes
  c.mechanism = m;
  c.outcomes[0] = {{0.2, 0.6}, 0.5, 1.0, 0.0};
  c.coding = {Semantic::survival, Monotonicity::s1_le_s0};
  c.direction = OutcomeDirection::higher_is_better;
  c.hide_outcome_on_event = true;

  int bracketed = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    auto g = generate(c, 7000 + rep);
    const double truth = true_principal_effect(g.table, {StrataLabel::S00});
    auto b = zhang_rubin_bounds(g.dataset);
    if (b.lower <= truth && truth <= b.upper) ++bracketed;
  }
  CHECK(bracketed >= reps - 1);
}

TEST_CASE("sensitivity estimators demand the codings they are defined for") {
  auto ds = binary_trial(10, 5, 2, 10, 8, 4, {Semantic::adverse_event, Monotonicity::none});
  CHECK_THROWS_WITH_AS(binary_gamma(ds, 0.5), doctest::Contains("InvalidCoding"),
                       ValidationError);
  auto p = preset("gbh_monotone");
  p.config.n = 200;
  auto g = generate(p.config, 1);
  TrialDataset wrong = g.dataset;
  wrong.coding.monotonicity = Monotonicity::none;
  CHECK_THROWS_WITH_AS(gbh_continuous(wrong, {0.0}, 0, 1),
                       doctest::Contains("InvalidCoding"), ValidationError);
  CHECK_THROWS_WITH_AS(sace_crude(g.dataset, 0.0), doctest::Contains("InvalidCoding"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(zhang_rubin_bounds(g.dataset), doctest::Contains("InvalidCoding"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(cace_band_no_monotonicity(ds, 0, 0, 0),
                       doctest::Contains("InvalidCoding"), ValidationError);
}
