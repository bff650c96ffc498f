#include "pstrat/covariates.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "pstrat/errors.hpp"
#include "pstrat/numerics.hpp"
#include "pstrat/rng.hpp"

namespace pstrat {

namespace {

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

const char* kConvention = "treated minus control";

// Baseline design for an arm subset; rows align with the returned indices.
Matrix baseline_design(const TrialDataset& ds, const std::vector<std::size_t>& idx) {
  Matrix X(idx.size(), ds.covariate_names.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < X.cols; ++j)
      X(r, j) = ds.records[idx[r]].baseline[j];
  return X;
}

std::vector<std::size_t> arm_indices(const TrialDataset& ds, int arm) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (ds.records[i].trt == arm) idx.push_back(i);
  return idx;
}

// Flattened intermediate vector, or empty if any stage is unobserved.
std::vector<double> flat_intermediates(const SubjectRecord& r) {
  std::vector<double> z;
  for (const auto& stage : r.intermediates) {
    if (!stage) return {};
    z.insert(z.end(), stage->begin(), stage->end());
  }
  return z;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Event-free membership model Pr(S=0 | X) fit on one arm. A cell where S
// never varies short-circuits to a constant instead of a separating fit.
struct MembershipModel {
  bool constant = false;
  double value = 1.0;
  LogisticFit fit;
  std::size_t n_fit = 0;

  double prob(const std::vector<double>& x) const {
    return constant ? value : fit.prob(x);
  }
};

MembershipModel fit_membership(const TrialDataset& ds, int arm, const char* who) {
  const auto idx = arm_indices(ds, arm);
  if (idx.empty()) throw empty_arm(std::string(who) + ": an arm is empty");

  std::vector<int> free_flag(idx.size());
  bool all0 = true, all1 = true;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    free_flag[r] = ds.records[idx[r]].event == 0;
    (free_flag[r] ? all0 : all1) = false;
  }

  MembershipModel m;
  m.n_fit = idx.size();
  if (all0 || all1) {
    m.constant = true;
    m.value = all1 ? 1.0 : 0.0;
    return m;
  }
  try {
    m.fit = fit_logistic(baseline_design(ds, idx), free_flag);
  } catch (const EstimationError& e) {
    throw model_fit_failed(std::string(who) + ": membership model did not fit: " +
                           e.what());
  }
  return m;
}

void warn_weights(EstimateReport& rep, const std::vector<double>& w) {
  std::size_t extreme = 0;
  for (double v : w) extreme += v < 1e-6 || v > 1.0 - 1e-6;
  if (extreme > 0)
    rep.warnings.push_back(std::to_string(extreme) +
                           " membership weights fall outside [1e-6, 1-1e-6]");
}

} // namespace

double OutcomeModel::predict(const std::vector<double>& x) const {
  const std::size_t p = x.size();
  double base = coefficients[0];
  for (std::size_t j = 0; j < p; ++j) base += coefficients[1 + j] * x[j];
  if (kind == OutcomeModelKind::linear) return base;

  // mean of z given x, then average the y-model over the stored draws
  std::vector<double> zm(n_z);
  for (std::size_t k = 0; k < n_z; ++k) {
    double v = z_coef[k][0];
    for (std::size_t j = 0; j < p; ++j) v += z_coef[k][1 + j] * x[j];
    zm[k] = v;
  }
  // antithetic pairs: the draw mean is exactly zero, so a linear y-model
  // integrates to its plug-in value and no shared offset leaks in
  double acc = 0.0;
  std::vector<double> eps(n_z);
  for (std::size_t d = 0; d < n_draws; ++d) {
    if (d % 2 == 0) {
      Rng rng(seed, d / 2 + 1);
      for (auto& e : eps) e = rng.normal();
    } else {
      for (auto& e : eps) e = -e;
    }
    double pred = base;
    for (std::size_t k = 0; k < n_z; ++k) {
      double zd = zm[k];
      for (std::size_t l = 0; l <= k; ++l) zd += z_chol[k * n_z + l] * eps[l];
      pred += coefficients[1 + p + k] * zd;
    }
    acc += pred;
  }
  return acc / static_cast<double>(n_draws);
}

OutcomeModel fit_outcome_model(const TrialDataset& ds, int arm,
                               bool use_intermediates, std::uint64_t seed) {
  OutcomeModel m;
  m.arm = arm;
  m.kind = use_intermediates ? OutcomeModelKind::linear_with_intermediates
                             : OutcomeModelKind::linear;
  m.seed = seed;

  if (use_intermediates && ds.n_stages < 2)
    throw invalid_config("fit_outcome_model: the dataset has no intermediate outcomes");

  std::vector<std::size_t> rows;
  std::vector<std::vector<double>> zrows;
  std::vector<double> yv;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto& r = ds.records[i];
    if (r.trt != arm || !r.outcome) continue;
    if (use_intermediates) {
      auto z = flat_intermediates(r);
      if (z.empty()) continue;
      zrows.push_back(std::move(z));
    }
    rows.push_back(i);
    yv.push_back(*r.outcome);
  }
  if (rows.empty())
    throw model_fit_failed("fit_outcome_model: no usable rows in the fitting arm");

  const std::size_t p = ds.covariate_names.size();
  m.n_z = use_intermediates ? zrows[0].size() : 0;
  Matrix X(rows.size(), p + m.n_z);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < p; ++j) X(r, j) = ds.records[rows[r]].baseline[j];
    for (std::size_t k = 0; k < m.n_z; ++k) X(r, p + k) = zrows[r][k];
  }
  OlsFit yfit;
  try {
    yfit = fit_ols(X, yv);
  } catch (const Error& e) {
    throw model_fit_failed(std::string("fit_outcome_model: ") + e.what());
  }
  m.coefficients = yfit.coef;
  m.n_fit = rows.size();
  double sse = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<double> xr(X.cols);
    for (std::size_t j = 0; j < X.cols; ++j) xr[j] = X(r, j);
    const double e = yv[r] - yfit.predict(xr);
    sse += e * e;
  }
  m.rmse = std::sqrt(sse / static_cast<double>(rows.size()));
  if (!use_intermediates) return m;

  // homoscedastic multivariate linear model for z given x on the same rows
  Matrix Xb(rows.size(), p);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < p; ++j) Xb(r, j) = ds.records[rows[r]].baseline[j];
  Eigen::MatrixXd resid(rows.size(), m.n_z);
  m.z_coef.resize(m.n_z);
  for (std::size_t k = 0; k < m.n_z; ++k) {
    std::vector<double> zk(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) zk[r] = zrows[r][k];
    OlsFit zfit;
    try {
      zfit = fit_ols(Xb, zk);
    } catch (const Error& e) {
      throw model_fit_failed(std::string("fit_outcome_model: z-model: ") + e.what());
    }
    m.z_coef[k] = zfit.coef;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::vector<double> xr(p);
      for (std::size_t j = 0; j < p; ++j) xr[j] = Xb(r, j);
      resid(r, k) = zk[r] - zfit.predict(xr);
    }
  }
  const double denom = std::max<double>(1.0, rows.size() - p - 1);
  Eigen::MatrixXd sigma = resid.transpose() * resid / denom;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    sigma += 1e-10 * Eigen::MatrixXd::Identity(m.n_z, m.n_z);
    llt.compute(sigma);
    if (llt.info() != Eigen::Success)
      throw model_fit_failed("fit_outcome_model: residual covariance of the "
                             "intermediates is not positive definite");
  }
  Eigen::MatrixXd L = llt.matrixL();
  m.z_chol.assign(m.n_z * m.n_z, 0.0);
  for (std::size_t a = 0; a < m.n_z; ++a)
    for (std::size_t b = 0; b <= a; ++b) m.z_chol[a * m.n_z + b] = L(a, b);
  return m;
}

EstimateReport predicted_counterfactual_t1(const TrialDataset& ds,
                                           bool use_intermediates,
                                           std::uint64_t seed) {
  const OutcomeModel m1 = fit_outcome_model(ds, 1, use_intermediates, seed);

  double acc = 0.0;
  std::size_t n00 = 0;
  for (const auto& r : ds.records) {
    if (r.trt != 0 || r.event != 0 || !r.outcome) continue;
    acc += m1.predict(r.baseline) - *r.outcome;
    ++n00;
  }
  if (n00 == 0)
    throw empty_stratum_cell("predicted_counterfactual_t1: no event-free control "
                             "subjects with outcomes");

  EstimateReport rep;
  rep.method = "predicted_counterfactual_t1";
  rep.estimand = "average treatment effect in the stratum {S(0)=0}";
  rep.point = acc / static_cast<double>(n00);
  rep.n_used = n00 + m1.n_fit;
  rep.assumptions = {"SUTVA", "randomized assignment",
                     "S(0) independent of Y(1) given baseline covariates"};
  rep.meta["convention"] = kConvention;
  rep.meta["model_kind"] = use_intermediates ? "linear_with_intermediates" : "linear";
  rep.meta["model_rmse"] = format_double(m1.rmse);
  rep.meta["model_n"] = std::to_string(m1.n_fit);
  return rep;
}

EstimateReport strata_propensity_weighted_t2(const TrialDataset& ds) {
  const auto w0 = fit_membership(ds, 0, "strata_propensity_weighted_t2");

  double ctl_sum = 0.0;
  std::size_t ctl_n = 0, ctl_total = 0, ctl_free = 0;
  for (const auto& r : ds.records) {
    if (r.trt != 0) continue;
    ++ctl_total;
    if (r.event == 0) {
      ++ctl_free;
      if (r.outcome) {
        ctl_sum += *r.outcome;
        ++ctl_n;
      }
    }
  }
  if (ctl_n == 0)
    throw empty_stratum_cell("strata_propensity_weighted_t2: no event-free control "
                             "subjects with outcomes");
  const double p0 = static_cast<double>(ctl_free) / static_cast<double>(ctl_total);
  if (p0 <= 0.0)
    throw degenerate_weights("strata_propensity_weighted_t2: no event-free control "
                             "subjects, the reweighted term is undefined");

  std::vector<double> w;
  double wy = 0.0;
  std::size_t trt_used = 0, trt_dropped = 0;
  for (const auto& r : ds.records) {
    if (r.trt != 1) continue;
    if (!r.outcome) {
      ++trt_dropped;
      continue;
    }
    const double wi = w0.prob(r.baseline);
    w.push_back(wi);
    wy += wi * *r.outcome;
    ++trt_used;
  }
  if (trt_used == 0)
    throw empty_arm("strata_propensity_weighted_t2: no treated subjects with outcomes");

  EstimateReport rep;
  rep.method = "strata_propensity_weighted_t2";
  rep.estimand = "average treatment effect in the stratum {S(0)=0}";
  rep.point = wy / (static_cast<double>(trt_used) * p0) -
              ctl_sum / static_cast<double>(ctl_n);
  rep.n_used = ctl_n + trt_used;
  rep.assumptions = {"SUTVA", "randomized assignment",
                     "S(0) independent of Y(1) given baseline covariates"};
  rep.meta["convention"] = kConvention;
  rep.meta["p0"] = format_double(p0);
  if (w0.constant)
    rep.warnings.push_back("membership status never varies in the control arm; "
                           "the weight model degenerates to the constant " +
                           std::to_string(w0.value));
  else
    warn_weights(rep, w);
  if (trt_dropped > 0)
    rep.warnings.push_back(std::to_string(trt_dropped) +
                           " treated records without outcomes were dropped from "
                           "the reweighted term");
  return rep;
}

EstimateReport no_mono_weighted(const TrialDataset& ds, NoMonoVariant variant) {
  const auto w0 = fit_membership(ds, 0, "no_mono_weighted");
  const auto w1 = fit_membership(ds, 1, "no_mono_weighted");

  // self-normalized weighted mean over one arm; completers only for T3
  const bool completers_only = variant == NoMonoVariant::T3;
  std::vector<double> used_weights;
  std::size_t dropped = 0, n_used = 0;
  auto weighted_mean = [&](int arm) {
    double sw = 0.0, swy = 0.0;
    for (const auto& r : ds.records) {
      if (r.trt != arm) continue;
      if (completers_only && r.event != 0) continue;
      if (!r.outcome) {
        ++dropped;
        continue;
      }
      const double wi = completers_only
                            ? (arm == 0 ? w1.prob(r.baseline) : w0.prob(r.baseline))
                            : w0.prob(r.baseline) * w1.prob(r.baseline);
      used_weights.push_back(wi);
      sw += wi;
      swy += wi * *r.outcome;
      ++n_used;
    }
    if (sw <= 0.0)
      throw degenerate_weights("no_mono_weighted: weight sum is zero in one arm");
    return swy / sw;
  };

  const double ctl = weighted_mean(0);
  const double trt = weighted_mean(1);

  EstimateReport rep;
  rep.method = variant == NoMonoVariant::T3 ? "no_mono_weighted_t3"
                                            : "no_mono_weighted_t4";
  rep.estimand = "average effect among " +
                 ds.coding.display_name(StrataLabel::S00) + "s";
  rep.point = trt - ctl;
  rep.n_used = n_used;
  rep.assumptions = {"SUTVA", "randomized assignment",
                     "S(0) independent of S(1) given baseline covariates"};
  rep.meta["convention"] = kConvention;
  if (!w0.constant || !w1.constant) warn_weights(rep, used_weights);
  if (dropped > 0)
    rep.warnings.push_back(std::to_string(dropped) +
                           " records without outcomes were dropped");
  return rep;
}

namespace {

std::array<StrataLabel, 3> open_strata(Monotonicity dir) {
  if (dir == Monotonicity::s1_le_s0)
    return {StrataLabel::S00, StrataLabel::S10, StrataLabel::S11};
  return {StrataLabel::S00, StrataLabel::S01, StrataLabel::S11};
}

// State shared between the M-step and the E-step: the linear predictor, its
// row log-sum-exp, and the row softmax, all consistent with theta.
struct SoftmaxState {
  Eigen::MatrixXd L;
  Eigen::ArrayXd lse;
  Eigen::MatrixXd P;

  void refresh(const Eigen::MatrixXd& X, const Eigen::MatrixXd& theta) {
    L = X * theta;
    const Eigen::ArrayXd mx = L.rowwise().maxCoeff().array();
    P = (L.array().colwise() - mx).exp();
    const Eigen::ArrayXd denom = P.rowwise().sum();
    lse = mx + denom.log();
    P.array().colwise() /= denom;
  }
};

// Soft-label multinomial logit step: maximize sum_i sum_u R(i,u) log p_u(x_i)
// by Newton with step halving over the two non-reference columns of theta.
// The state stays consistent with theta throughout, so the caller's E-step
// costs no further transcendentals.
void maximize_multinomial(const Eigen::MatrixXd& X, const Eigen::MatrixXd& R,
                          Eigen::MatrixXd& theta, SoftmaxState& st) {
  const Eigen::Index n = X.rows(), p = X.cols();
  double q = (R.array() * (st.L.array().colwise() - st.lse)).sum();
  SoftmaxState trial_st;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd g(2 * p);
    g.segment(0, p) = X.transpose() * (R.col(1) - st.P.col(1));
    g.segment(p, p) = X.transpose() * (R.col(2) - st.P.col(2));
    if (g.lpNorm<Eigen::Infinity>() <
        1e-9 * static_cast<double>(n) + 1e-10)
      break;

    Eigen::MatrixXd H(2 * p, 2 * p);
    const auto block = [&](int u, int v) {
      Eigen::VectorXd d =
          (st.P.col(u).array() * ((u == v ? 1.0 : 0.0) - st.P.col(v).array()))
              .matrix();
      return Eigen::MatrixXd(X.transpose() * d.asDiagonal() * X);
    };
    H.block(0, 0, p, p) = block(1, 1);
    H.block(0, p, p, p) = block(1, 2);
    H.block(p, 0, p, p) = block(2, 1);
    H.block(p, p, p, p) = block(2, 2);

    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step = ldlt.solve(g);
    if (!step.allFinite()) {
      H += 1e-8 * Eigen::MatrixXd::Identity(2 * p, 2 * p);
      step = H.ldlt().solve(g);
      if (!step.allFinite())
        throw rank_deficient("fit_principal_scores_em: singular information matrix");
    }

    // the objective is a sum over all subjects, so improvements smaller than
    // its floating-point noise floor count as converged, not as failures
    const double qtol = 1e-12 * (1.0 + std::abs(q));
    Eigen::MatrixXd trial = theta;
    double scale = 1.0;
    bool accepted = false, at_optimum = false;
    for (int h = 0; h < 40; ++h) {
      trial.col(1) = theta.col(1) + scale * step.segment(0, p);
      trial.col(2) = theta.col(2) + scale * step.segment(p, p);
      trial_st.refresh(X, trial);
      const double qt =
          (R.array() * (trial_st.L.array().colwise() - trial_st.lse)).sum();
      if (qt >= q - qtol) {
        theta.swap(trial);
        std::swap(st, trial_st);
        at_optimum = qt - q < qtol;
        q = qt;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted || at_optimum) break;
  }
}

struct EmRun {
  Eigen::MatrixXd theta;
  double ll = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

} // namespace

double PrincipalScoreModel::prob_of(std::size_t subject, StrataLabel u) const {
  for (std::size_t k = 0; k < strata.size(); ++k)
    if (strata[k] == u) return probabilities[subject][k];
  return 0.0;
}

PrincipalScoreModel fit_principal_scores_em(const TrialDataset& ds) {
  const Monotonicity dir = ds.coding.monotonicity;
  if (dir == Monotonicity::none)
    throw invalid_coding("fit_principal_scores_em: a monotonicity direction is "
                         "required so that one stratum is empty");
  const auto strata = open_strata(dir);
  const std::size_t n = ds.n();
  if (n == 0) throw empty_arm("fit_principal_scores_em: empty dataset");
  const std::size_t p = ds.covariate_names.size() + 1;

  Eigen::MatrixXd X(n, p);
  Eigen::MatrixXd M(n, 3); // 1 where the stratum fits the observed (T, S) cell
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = ds.records[i];
    X(i, 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j) X(i, j) = r.baseline[j - 1];
    for (int u = 0; u < 3; ++u) {
      const StrataLabel lab = strata[u];
      const int su = r.trt == 1 ? s1_of(lab) : s0_of(lab);
      M(i, u) = su == r.event ? 1.0 : 0.0;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < p)
    throw rank_deficient("fit_principal_scores_em: covariate design is rank "
                         "deficient");

  // staged start: the pure cells identify S00 and S11 membership directly
  const int pure00_arm = dir == Monotonicity::s1_le_s0 ? 0 : 1;
  const auto cell_fit = [&](int arm, int positive_event) {
    const auto idx = arm_indices(ds, arm);
    std::vector<int> yv(idx.size());
    std::size_t pos = 0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      yv[r] = ds.records[idx[r]].event == positive_event;
      pos += yv[r];
    }
    std::vector<double> coef(p, 0.0);
    if (idx.empty()) return coef;
    const double share = std::clamp(static_cast<double>(pos) / idx.size(),
                                    1e-3, 1.0 - 1e-3);
    coef[0] = std::log(share / (1.0 - share));
    if (pos == 0 || pos == idx.size()) return coef;
    try {
      const auto fit = fit_logistic(baseline_design(ds, idx), yv);
      return fit.coef;
    } catch (const EstimationError&) {
      return coef; // fall back to the margin-only start
    }
  };
  const auto a = cell_fit(pure00_arm, 0);      // membership in S00
  const auto b = cell_fit(1 - pure00_arm, 1);  // membership in S11

  double pbar00 = 0.0, pbar11 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double la = a[0], lb = b[0];
    for (std::size_t j = 1; j < p; ++j) {
      la += a[j] * X(i, j);
      lb += b[j] * X(i, j);
    }
    pbar00 += expit(la);
    pbar11 += expit(lb);
  }
  pbar00 = std::clamp(pbar00 / static_cast<double>(n), 1e-3, 1.0 - 1e-3);
  pbar11 = std::clamp(pbar11 / static_cast<double>(n), 1e-3, 1.0 - 1e-3);
  const double pbar_mid = std::clamp(1.0 - pbar00 - pbar11, 1e-3, 1.0);

  Eigen::MatrixXd theta0 = Eigen::MatrixXd::Zero(p, 3);
  theta0(0, 1) = std::log(pbar_mid / pbar00);
  theta0(0, 2) = std::log(pbar11 / pbar00);
  for (std::size_t j = 1; j < p; ++j) theta0(j, 2) = b[j] - a[j];

  // with P the row softmax of X*theta, the observed-data log-likelihood is
  // sum_i log(sum of P over the compatible strata), and the responsibilities
  // are the compatible entries renormalized — the full-softmax denominator
  // cancels out of both
  const auto masked_ll = [&](const Eigen::MatrixXd& P) {
    const Eigen::ArrayXd pc = (P.array() * M.array()).rowwise().sum();
    if ((pc <= 0.0).any()) return -std::numeric_limits<double>::infinity();
    return pc.log().sum();
  };

  std::vector<EmRun> runs(5);
  parallel_for(runs.size(), 0, [&](std::size_t s) {
    Eigen::MatrixXd theta = theta0;
    if (s > 0) {
      Rng rng(131, s);
      for (Eigen::Index j = 0; j < theta.rows(); ++j)
        for (int u = 1; u < 3; ++u) theta(j, u) += rng.normal(0.0, 0.5);
    }
    SoftmaxState st;
    st.refresh(X, theta);
    double ll = masked_ll(st.P);
    EmRun run;
    if (!std::isfinite(ll)) {
      runs[s] = std::move(run); // a wild restart can underflow; skip it
      return;
    }
    Eigen::MatrixXd R(n, 3);
    for (std::size_t it = 1; it <= 500; ++it) {
      R = st.P.array() * M.array();
      R.array().colwise() /= R.rowwise().sum().array();
      maximize_multinomial(X, R, theta, st);
      const double ll_new = masked_ll(st.P);
      if (ll_new < ll - 1e-9 * (1.0 + std::abs(ll)))
        throw model_fit_failed("fit_principal_scores_em: the observed-data "
                               "log-likelihood decreased between iterations");
      run.iterations = it;
      if (std::abs(ll_new - ll) < 1e-8) {
        ll = ll_new;
        run.converged = true;
        break;
      }
      ll = ll_new;
    }
    run.theta = theta;
    run.ll = ll;
    runs[s] = std::move(run);
  });

  std::size_t best = 0;
  for (std::size_t s = 1; s < runs.size(); ++s)
    if (runs[s].ll > runs[best].ll) best = s;
  const EmRun& win = runs[best];
  if (!std::isfinite(win.ll))
    throw non_finite_likelihood("fit_principal_scores_em: every start left some "
                                "subject without mass on a compatible stratum");

  PrincipalScoreModel model;
  model.direction = dir;
  model.strata = strata;
  model.reference = 0;
  model.coefficients.assign(3, std::vector<double>(p, 0.0));
  for (int u = 0; u < 3; ++u)
    for (std::size_t j = 0; j < p; ++j) model.coefficients[u][j] = win.theta(j, u);
  model.loglik = win.ll;
  model.em_iterations = win.iterations;
  model.converged = win.converged;

  model.probabilities.resize(n);
  model.marginal = {0.0, 0.0, 0.0};
  SoftmaxState fin;
  fin.refresh(X, win.theta);
  for (std::size_t i = 0; i < n; ++i)
    for (int u = 0; u < 3; ++u) {
      model.probabilities[i][u] = fin.P(i, u);
      model.marginal[u] += fin.P(i, u);
    }
  for (auto& v : model.marginal) v /= static_cast<double>(n);
  return model;
}

EstimateReport principal_score_estimator(const TrialDataset& ds,
                                         const PrincipalScoreModel& model) {
  if (ds.coding.monotonicity == Monotonicity::none)
    throw invalid_coding("principal_score_estimator: a monotonicity direction is "
                         "required");
  if (model.direction != ds.coding.monotonicity)
    throw invalid_coding("principal_score_estimator: the model was fit under a "
                         "different monotonicity direction");
  if (model.probabilities.size() != ds.n())
    throw dimension_mismatch("principal_score_estimator: model covers " +
                             std::to_string(model.probabilities.size()) +
                             " subjects, dataset has " + std::to_string(ds.n()));

  const bool mix_treated = ds.coding.monotonicity == Monotonicity::s1_le_s0;
  const int mix_arm = mix_treated ? 1 : 0;
  const StrataLabel mid =
      mix_treated ? StrataLabel::S10 : StrataLabel::S01;

  std::vector<double> q, y_mix;
  double plain_sum = 0.0;
  std::size_t plain_n = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto& r = ds.records[i];
    if (r.event != 0 || !r.outcome) continue;
    if (r.trt == mix_arm) {
      const double p00 = model.prob_of(i, StrataLabel::S00);
      const double pm = model.prob_of(i, mid);
      q.push_back(p00 + pm > 0.0 ? p00 / (p00 + pm) : 0.0);
      y_mix.push_back(*r.outcome);
    } else {
      plain_sum += *r.outcome;
      ++plain_n;
    }
  }
  if (q.empty() || plain_n == 0)
    throw empty_stratum_cell("principal_score_estimator: an event-free cell has "
                             "no outcomes");
  double qsum = 0.0;
  for (double v : q) qsum += v;
  if (qsum <= 0.0)
    throw degenerate_weights("principal_score_estimator: every weight in the "
                             "mixture cell is zero");
  const double qbar = qsum / static_cast<double>(q.size());

  double wsum = 0.0, wy = 0.0, wmean = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double w = q[k] / qbar;
    wsum += w;
    wy += w * y_mix[k];
    wmean += w;
  }
  wmean /= static_cast<double>(q.size());
  const double mix_mean = wy / wsum;
  const double plain_mean = plain_sum / static_cast<double>(plain_n);

  EstimateReport rep;
  rep.method = "principal_score_estimator";
  rep.estimand = "average effect among " +
                 ds.coding.display_name(StrataLabel::S00) + "s";
  rep.point = mix_treated ? mix_mean - plain_mean : plain_mean - mix_mean;
  rep.n_used = q.size() + plain_n;
  rep.assumptions = {"SUTVA", "randomized assignment",
                     mix_treated ? "monotonicity S(1) <= S(0)"
                                 : "monotonicity S(1) >= S(0)",
                     "principal ignorability given baseline covariates"};
  rep.meta["convention"] = kConvention;
  rep.meta["weighted_arm"] = mix_treated ? "treated" : "control";
  rep.meta["mean_weight"] = format_double(wmean);
  return rep;
}

CovariateDistribution strata_covariate_distribution(
    const TrialDataset& ds, const std::vector<std::array<double, 4>>& probs,
    StrataLabel stratum, const std::string& covariate) {
  if (probs.size() != ds.n())
    throw dimension_mismatch("strata_covariate_distribution: " +
                             std::to_string(probs.size()) + " probability rows for " +
                             std::to_string(ds.n()) + " subjects");
  const auto it = std::find(ds.covariate_names.begin(), ds.covariate_names.end(),
                            covariate);
  if (it == ds.covariate_names.end())
    throw invalid_config("strata_covariate_distribution: unknown covariate '" +
                         covariate + "'");
  const std::size_t j = it - ds.covariate_names.begin();

  std::vector<double> x(ds.n()), w(ds.n());
  double wtotal = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    x[i] = ds.records[i].baseline[j];
    const double pi = probs[i][static_cast<int>(stratum)];
    if (!(pi >= 0.0 && pi <= 1.0))
      throw invalid_config("strata_covariate_distribution: stratum probability "
                           "outside [0, 1]");
    w[i] = pi;
    wtotal += pi;
  }
  if (wtotal <= 0.0)
    throw all_zero_probabilities("strata_covariate_distribution: every subject has "
                                 "zero probability of the requested stratum");

  CovariateDistribution out;
  out.covariate = covariate;
  out.stratum = stratum;

  std::set<double> distinct(x.begin(), x.end());
  bool integral = true;
  for (double v : distinct)
    if (std::floor(v) != v) {
      integral = false;
      break;
    }
  out.categorical = integral && distinct.size() <= 12;

  double wx = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    wx += w[i] * x[i];
    sx += x[i];
  }
  out.mean_stratum = wx / wtotal;
  out.mean_overall = sx / static_cast<double>(ds.n());

  if (out.categorical) {
    out.categories.assign(distinct.begin(), distinct.end());
    out.prop_stratum.assign(out.categories.size(), 0.0);
    out.prop_overall.assign(out.categories.size(), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const std::size_t l =
          std::find(out.categories.begin(), out.categories.end(), x[i]) -
          out.categories.begin();
      out.prop_stratum[l] += w[i] / wtotal;
      out.prop_overall[l] += 1.0 / static_cast<double>(ds.n());
    }
    return out;
  }

  const KdeResult strat = weighted_kde(x, w);
  const std::vector<double> ones(ds.n(), 1.0);
  const KdeResult overall = weighted_kde(x, ones, strat.grid);
  out.grid = strat.grid;
  out.density_stratum = strat.density;
  out.density_overall = overall.density;
  out.bandwidth = strat.bandwidth;
  return out;
}

std::string CovariateDistribution::to_csv_text() const {
  std::ostringstream os;
  if (categorical) {
    os << "category,prop_stratum,prop_overall\n";
    for (std::size_t l = 0; l < categories.size(); ++l)
      os << format_double(categories[l]) << ',' << format_double(prop_stratum[l])
         << ',' << format_double(prop_overall[l]) << '\n';
  } else {
    os << "grid,density_stratum,density_overall\n";
    for (std::size_t g = 0; g < grid.size(); ++g)
      os << format_double(grid[g]) << ',' << format_double(density_stratum[g])
         << ',' << format_double(density_overall[g]) << '\n';
  }
  return os.str();
}

} // namespace pstrat
