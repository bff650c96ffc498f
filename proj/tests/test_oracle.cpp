#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/errors.hpp"
#include "pstrat/numerics.hpp"
#include "pstrat/oracle.hpp"

using namespace pstrat;

namespace {

// Compliance world: four compliers with individual effect 2, three
// never-takers and three always-takers with no effect.
PotentialOutcomeTable hand_table() {
  PotentialOutcomeTable t;
  auto add = [&](int s0, int s1, double y0, double y1, int trt) {
    PoSubject s;
    s.s0 = s0;
    s.s1 = s1;
    s.y0 = y0;
    s.y1 = y1;
    s.t = trt;
    t.subjects.push_back(s);
  };
  add(0, 1, 0, 2, 1);
  add(0, 1, 1, 3, 0);
  add(0, 1, 2, 4, 1);
  add(0, 1, 3, 5, 0);
  add(0, 0, 1, 1, 1);
  add(0, 0, 2, 2, 0);
  add(0, 0, 3, 3, 1);
  add(1, 1, 4, 4, 0);
  add(1, 1, 5, 5, 1);
  add(1, 1, 6, 6, 0);
  return t;
}

} // namespace

TEST_CASE("true_principal_effect enumerates the hand table") {
  auto t = hand_table();
  CHECK(true_principal_effect(t, {StrataLabel::S01}) == 2.0);
  CHECK(true_principal_effect(t, {StrataLabel::S00, StrataLabel::S11}) == 0.0);
  const double ate = true_principal_effect(
      t, {StrataLabel::S00, StrataLabel::S01, StrataLabel::S10, StrataLabel::S11});
  CHECK(ate == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(true_principal_effect(t, {StrataLabel::S10}),
                       doctest::Contains("EmptyStratum"), EstimationError);
}

TEST_CASE("stratum effects weighted by mass partition the ATE") {
  auto p = preset("crossworld_independent");
  p.config.n = 5000;
  auto g = generate(p.config, 42);
  const std::vector<StrataLabel> all{StrataLabel::S00, StrataLabel::S01, StrataLabel::S10,
                                     StrataLabel::S11};
  const double ate = true_principal_effect(g.table, all);
  double mix = 0.0;
  for (StrataLabel u : all) {
    const double f = stratum_fraction(g.table, {u});
    if (f > 0.0) mix += f * true_principal_effect(g.table, {u});
  }
  CHECK(mix == doctest::Approx(ate).epsilon(1e-12));
}

TEST_CASE("monotone selection mechanism leaves the forbidden cell empty") {
  auto p = preset("gbh_monotone");
  p.config.n = 20000;
  auto g = generate(p.config, 7);
  CHECK(stratum_fraction(g.table, {StrataLabel::S01}) == 0.0);
  // the violated twin populates it
  auto bad = generate(p.violated, 7);
  CHECK(stratum_fraction(bad.table, {StrataLabel::S01}) > 0.01);
}

TEST_CASE("randomized assignment balances arms") {
  auto p = preset("pi_baseline");
  p.config.n = 100000;
  auto g = generate(p.config, 3);
  const double frac =
      static_cast<double>(g.dataset.arm_count(1)) / static_cast<double>(g.dataset.n());
  CHECK(std::abs(frac - 0.5) < 0.01);
}

TEST_CASE("exclusion-restriction mechanism fixes Y across arms for non-compliers") {
  auto p = preset("iv_compliance");
  p.config.n = 5000;
  auto g = generate(p.config, 11);
  std::size_t checked = 0;
  for (const auto& s : g.table.subjects) {
    if (s.label() == StrataLabel::S00 || s.label() == StrataLabel::S11) {
      CHECK(s.y0 == s.y1);
      ++checked;
    }
  }
  CHECK(checked > 0);
  CHECK(stratum_fraction(g.table, {StrataLabel::S10}) == 0.0);
  // complier effect is the configured shift exactly in expectation
  CHECK(true_principal_effect(g.table, {StrataLabel::S01}) ==
        doctest::Approx(2.0).epsilon(0.05));
  // violated twin has defiers
  auto bad = generate(p.violated, 11);
  CHECK(stratum_fraction(bad.table, {StrataLabel::S10}) > 0.01);
}

TEST_CASE("observed rows equal the potential values of the assigned arm") {
  auto p = preset("pi_baseline");
  p.config.n = 2000;
  auto g = generate(p.config, 5);
  REQUIRE(g.dataset.n() == g.table.subjects.size());
  for (std::size_t i = 0; i < g.dataset.n(); ++i) {
    const auto& r = g.dataset.records[i];
    const auto& s = g.table.subjects[i];
    CHECK(r.trt == s.t);
    CHECK(r.event == (s.t == 1 ? s.s1 : s.s0));
    REQUIRE(r.outcome.has_value());
    CHECK(*r.outcome == (s.t == 1 ? s.y1 : s.y0));
    CHECK(r.baseline == s.x);
  }
}

TEST_CASE("dropout-style designs hide the outcome on the event") {
  auto p = preset("gbh_monotone");
  p.config.n = 3000;
  auto g = generate(p.config, 9);
  for (std::size_t i = 0; i < g.dataset.n(); ++i) {
    const auto& r = g.dataset.records[i];
    CHECK(r.outcome.has_value() == (r.event == 0));
  }
}

TEST_CASE("generation is bit-identical across seeds reuse and thread counts") {
  auto p = preset("staged_qu");
  p.config.n = 4000;
  set_max_threads(1);
  auto a = generate(p.config, 123);
  set_max_threads(4);
  auto b = generate(p.config, 123);
  set_max_threads(1);
  REQUIRE(a.table.subjects.size() == b.table.subjects.size());
  for (std::size_t i = 0; i < a.table.subjects.size(); ++i) {
    const auto& sa = a.table.subjects[i];
    const auto& sb = b.table.subjects[i];
    CHECK(sa.x == sb.x);
    CHECK(sa.t == sb.t);
    CHECK(sa.s0 == sb.s0);
    CHECK(sa.s1 == sb.s1);
    CHECK(sa.y0 == sb.y0);
    CHECK(sa.y1 == sb.y1);
    CHECK(sa.z[0] == sb.z[0]);
    CHECK(sa.z[1] == sb.z[1]);
  }
  CHECK(to_csv_text(a.dataset) == to_csv_text(b.dataset));
}

TEST_CASE("staged designs truncate the observed path at the first event") {
  auto p = preset("staged_qu");
  p.config.n = 3000;
  auto g = generate(p.config, 21);
  REQUIRE(g.dataset.n_stages == 2);
  bool saw_drop1 = false, saw_drop2 = false, saw_complete = false;
  for (std::size_t i = 0; i < g.dataset.n(); ++i) {
    const auto& r = g.dataset.records[i];
    const auto& s = g.table.subjects[i];
    const int drop = s.drop_stage[s.t];
    // full latent path always exists in the table
    CHECK(s.z[0].size() == 1);
    CHECK(s.z[1].size() == 1);
    if (drop == 1) {
      saw_drop1 = true;
      CHECK(r.stage_events[0] == 1);
      CHECK(!r.stage_events[1].has_value());
      CHECK(!r.intermediates[0].has_value());
      CHECK(!r.outcome.has_value());
    } else if (drop == 2) {
      saw_drop2 = true;
      CHECK(r.stage_events[0] == 0);
      CHECK(r.stage_events[1] == 1);
      REQUIRE(r.intermediates[0].has_value());
      CHECK((*r.intermediates[0])[0] == s.z[s.t][0]);
      CHECK(!r.outcome.has_value());
    } else {
      saw_complete = true;
      CHECK(r.stage_events[0] == 0);
      CHECK(r.stage_events[1] == 0);
      REQUIRE(r.outcome.has_value());
    }
  }
  CHECK(saw_drop1);
  CHECK(saw_drop2);
  CHECK(saw_complete);
}

TEST_CASE("randomization keeps assignment independent of potential outcomes") {
  auto p = preset("crossworld_independent");
  p.config.n = 2000;
  int rejections = 0;
  const int n_seeds = 100;
  for (int seed = 0; seed < n_seeds; ++seed) {
    auto g = generate(p.config, 1000 + seed);
    double mt = 0, my = 0;
    const double n = static_cast<double>(g.table.subjects.size());
    for (const auto& s : g.table.subjects) {
      mt += s.t;
      my += s.y0;
    }
    mt /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (const auto& s : g.table.subjects) {
      sxy += (s.t - mt) * (s.y0 - my);
      sxx += (s.t - mt) * (s.t - mt);
      syy += (s.y0 - my) * (s.y0 - my);
    }
    const double r = sxy / std::sqrt(sxx * syy);
    const double z = r * std::sqrt(n - 3.0); // Fisher z-ish, rho = 0
    if (std::abs(z) > 3.2905) ++rejections;  // two-sided alpha = 0.001
  }
  CHECK(rejections <= 1);
}

TEST_CASE("confounded assignment follows its logistic model") {
  auto p = preset("confounded_obs");
  p.config.n = 100000;
  auto g = generate(p.config, 17);
  Matrix X(g.table.subjects.size(), 2);
  std::vector<int> t(g.table.subjects.size());
  for (std::size_t i = 0; i < g.table.subjects.size(); ++i) {
    X(i, 0) = g.table.subjects[i].x[0];
    X(i, 1) = g.table.subjects[i].x[1];
    t[i] = g.table.subjects[i].t;
  }
  auto fit = fit_logistic(X, t);
  CHECK(fit.coef[0] == doctest::Approx(0.2).epsilon(0.25));
  CHECK(std::abs(fit.coef[0] - 0.2) < 0.05);
  CHECK(std::abs(fit.coef[1] - 0.8) < 0.05);
  CHECK(std::abs(fit.coef[2] - (-0.6)) < 0.05);
}

TEST_CASE("cross-world violated twin makes S(1) depend on S(0)") {
  auto p = preset("crossworld_independent");
  p.config.n = 50000;
  p.violated.n = 50000;
  auto fit_s0_coef = [](const PotentialOutcomeTable& table) {
    Matrix X(table.subjects.size(), 3);
    std::vector<int> s1(table.subjects.size());
    for (std::size_t i = 0; i < table.subjects.size(); ++i) {
      X(i, 0) = table.subjects[i].x[0];
      X(i, 1) = table.subjects[i].x[1];
      X(i, 2) = table.subjects[i].s0;
      s1[i] = table.subjects[i].s1;
    }
    return fit_logistic(X, s1).coef[3];
  };
  CHECK(std::abs(fit_s0_coef(generate(p.config, 31).table)) < 0.1);
  CHECK(fit_s0_coef(generate(p.violated, 31).table) > 1.0);
}

TEST_CASE("table export appends the counterfactual columns") {
  auto p = preset("pi_baseline");
  p.config.n = 50;
  auto g = generate(p.config, 2);
  const std::string text = table_to_csv_text(g.table, p.config);
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  CHECK(header.find(",s0,s1,y0,y1") == header.size() - 12);
  // the leading columns still parse as a standard dataset
  std::string base_text = to_csv_text(g.dataset);
  std::istringstream base_in(base_text);
  std::string base_header;
  std::getline(base_in, base_header);
  CHECK(header.substr(0, base_header.size()) == base_header);
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 50);
}

TEST_CASE("presets cover the documented designs and reject unknown names") {
  for (const auto& name : preset_names()) {
    auto p = preset(name);
    CHECK(!p.violated_assumption.empty());
    CHECK(p.config.n > 0);
  }
  CHECK_THROWS_WITH_AS(preset("nope"), doctest::Contains("UnknownPreset"), ValidationError);
}

TEST_CASE("config validation rejects bad inputs") {
  DGPConfig c;
  c.n = 0;
  CHECK_THROWS_WITH_AS(generate(c, 1), doctest::Contains("InvalidConfig"), ValidationError);
  auto p = preset("pi_baseline");
  p.config.cross_world_rho = 1.5;
  CHECK_THROWS_WITH_AS(generate(p.config, 1), doctest::Contains("InvalidConfig"),
                       ValidationError);
  auto q = preset("iv_compliance");
  std::get<MechExclusionCompliance>(q.config.mechanism).never_coef = {0.1};
  CHECK_THROWS_WITH_AS(generate(q.config, 1), doctest::Contains("InvalidConfig"),
                       ValidationError);
}
