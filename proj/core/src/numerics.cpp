#include "pstrat/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "pstrat/errors.hpp"
#include "pstrat/rng.hpp"

namespace pstrat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::atomic<unsigned> g_max_threads{1};

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)) without overflow
double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Design with implicit leading intercept column.
RowMat build_design(const Matrix& X) {
  RowMat D(X.rows, X.cols + 1);
  for (std::size_t i = 0; i < X.rows; ++i) {
    D(i, 0) = 1.0;
    for (std::size_t j = 0; j < X.cols; ++j) D(i, j + 1) = X(i, j);
  }
  return D;
}

} // namespace

void Matrix::append_row(const std::vector<double>& row) {
  if (rows == 0 && cols == 0) cols = row.size();
  if (row.size() != cols) throw dimension_mismatch("appended row has wrong width");
  data.insert(data.end(), row.begin(), row.end());
  ++rows;
}

void set_max_threads(unsigned n) { g_max_threads.store(n == 0 ? 1 : n); }
unsigned max_threads() { return g_max_threads.load(); }

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = max_threads();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex err_mutex;
  std::exception_ptr first_error;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double LogisticFit::linear(const std::vector<double>& x) const {
  double v = coef[0];
  for (std::size_t j = 0; j + 1 < coef.size(); ++j) v += coef[j + 1] * x[j];
  return v;
}

double LogisticFit::prob(const std::vector<double>& x) const { return expit(linear(x)); }

LogisticFit fit_logistic(const Matrix& X, const std::vector<int>& y,
                         const std::vector<double>& weights, int max_iter) {
  const std::size_t n = X.rows;
  const std::size_t p = X.cols + 1;
  if (y.size() != n) throw dimension_mismatch("fit_logistic: y length != rows");
  if (!weights.empty() && weights.size() != n)
    throw dimension_mismatch("fit_logistic: weight length != rows");
  if (n == 0) throw model_fit_failed("fit_logistic: no rows");

  RowMat D = build_design(X);
  {
    Eigen::ColPivHouseholderQR<RowMat> qr(D);
    qr.setThreshold(1e-10);
    if (static_cast<std::size_t>(qr.rank()) < p)
      throw rank_deficient("fit_logistic: design has rank " + std::to_string(qr.rank()) +
                           " < " + std::to_string(p));
  }

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (!weights.empty()) w = Eigen::Map<const Eigen::VectorXd>(weights.data(), n);
  Eigen::VectorXd yy(n);
  for (std::size_t i = 0; i < n; ++i) yy[i] = y[i];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto loglik = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = D * b;
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      ll += w[i] * (yy[i] * eta[i] - softplus(eta[i]));
    return ll;
  };

  LogisticFit fit;
  double ll = loglik(beta);
  int iter = 0;
  bool converged = false;
  Eigen::MatrixXd H(p, p);
  for (; iter < max_iter; ++iter) {
    Eigen::VectorXd eta = D * beta;
    Eigen::VectorXd mu(n), wvar(n);
    for (std::size_t i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      wvar[i] = w[i] * mu[i] * (1.0 - mu[i]);
    }
    Eigen::VectorXd score = D.transpose() * (w.cwiseProduct(yy - mu));
    if (score.lpNorm<Eigen::Infinity>() < 1e-8) { converged = true; break; }

    H = D.transpose() * wvar.asDiagonal() * D;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(score);
    }
    if (step.size() == 0 || !step.allFinite()) {
      H.diagonal().array() += 1e-8;
      step = H.ldlt().solve(score);
      fit.ridge_used = true;
      if (!step.allFinite()) throw model_fit_failed("fit_logistic: singular information");
    }

    // Step halving keeps the log-likelihood monotone.
    double scale = 1.0;
    double ll_new = loglik(beta + step);
    int halvings = 0;
    while (ll_new < ll && halvings < 40) {
      scale *= 0.5;
      ll_new = loglik(beta + scale * step);
      ++halvings;
    }
    beta += scale * step;
    if (beta.norm() > 1e3)
      throw separation("fit_logistic: coefficient norm " + std::to_string(beta.norm()) +
                       " suggests separation");
    const double rel = std::abs(ll_new - ll) / (std::abs(ll) + 1.0);
    ll = ll_new;
    if (rel < 1e-10) {
      // One extra Newton step polishes the coefficients to near machine
      // precision once the likelihood has flattened out.
      Eigen::VectorXd eta2 = D * beta;
      Eigen::VectorXd mu2(n), wvar2(n);
      for (std::size_t i = 0; i < n; ++i) {
        mu2[i] = expit(eta2[i]);
        wvar2[i] = w[i] * mu2[i] * (1.0 - mu2[i]);
      }
      Eigen::VectorXd score2 = D.transpose() * (w.cwiseProduct(yy - mu2));
      Eigen::MatrixXd H2 = D.transpose() * wvar2.asDiagonal() * D;
      Eigen::LDLT<Eigen::MatrixXd> ldlt2(H2);
      if (ldlt2.info() == Eigen::Success && ldlt2.isPositive()) {
        Eigen::VectorXd polish = ldlt2.solve(score2);
        const double ll_pol = polish.allFinite() ? loglik(beta + polish)
                                                 : -std::numeric_limits<double>::infinity();
        if (ll_pol >= ll - 1e-9 * (std::abs(ll) + 1.0)) {
          beta += polish;
          ll = ll_pol;
        }
      }
      ++iter;
      converged = true;
      break;
    }
  }

  if (beta.norm() > 1e3)
    throw separation("fit_logistic: coefficient norm " + std::to_string(beta.norm()) +
                     " suggests separation");
  {
    // Complete separation: every positively weighted observation classified
    // perfectly with the fitted probability pinned to 0 or 1.  The MLE does
    // not exist in that case, the iterations just chase it to infinity.
    Eigen::VectorXd eta = D * beta;
    bool pinned = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] <= 0.0) continue;
      const double m = yy[i] > 0.5 ? eta[i] : -eta[i];
      if (m < 15.0) { pinned = false; break; }
      pinned = true;
    }
    if (pinned)
      throw separation("fit_logistic: fitted probabilities are all 0 or 1");
  }

  // Covariance from the final information matrix.
  {
    Eigen::VectorXd eta = D * beta;
    Eigen::VectorXd wvar(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double m = expit(eta[i]);
      wvar[i] = w[i] * m * (1.0 - m);
    }
    H = D.transpose() * wvar.asDiagonal() * D;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::MatrixXd cov;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    } else {
      H.diagonal().array() += 1e-8;
      fit.ridge_used = true;
      cov = H.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    }
    fit.cov.assign(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) fit.cov[i * p + j] = cov(i, j);
  }

  fit.coef.assign(beta.data(), beta.data() + p);
  fit.loglik = ll;
  fit.iterations = iter;
  fit.converged = converged;
  return fit;
}

double OlsFit::predict(const std::vector<double>& x) const {
  double v = coef[0];
  for (std::size_t j = 0; j + 1 < coef.size(); ++j) v += coef[j + 1] * x[j];
  return v;
}

OlsFit fit_ols(const Matrix& X, const std::vector<double>& y,
               const std::vector<double>& weights) {
  const std::size_t n = X.rows;
  const std::size_t p = X.cols + 1;
  if (y.size() != n) throw dimension_mismatch("fit_ols: y length != rows");
  if (!weights.empty() && weights.size() != n)
    throw dimension_mismatch("fit_ols: weight length != rows");
  if (n <= p) throw model_fit_failed("fit_ols: need more rows than coefficients");

  RowMat D = build_design(X);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (!weights.empty()) w = Eigen::Map<const Eigen::VectorXd>(weights.data(), n);
  Eigen::Map<const Eigen::VectorXd> yy(y.data(), n);

  Eigen::MatrixXd G = D.transpose() * w.asDiagonal() * D;
  Eigen::VectorXd b = D.transpose() * (w.cwiseProduct(yy));
  OlsFit fit;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  Eigen::VectorXd beta;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) beta = ldlt.solve(b);
  if (beta.size() == 0 || !beta.allFinite()) {
    G.diagonal().array() += 1e-8;
    beta = G.ldlt().solve(b);
    fit.ridge_used = true;
    if (!beta.allFinite()) throw rank_deficient("fit_ols: singular normal equations");
  }

  Eigen::VectorXd resid = yy - D * beta;
  double wsum = w.sum();
  double rss = resid.cwiseProduct(w.cwiseProduct(resid)).sum();
  const double dof = wsum - static_cast<double>(p);
  fit.sigma2 = dof > 0 ? rss / dof : kNaN;

  Eigen::MatrixXd cov = G.ldlt().solve(Eigen::MatrixXd::Identity(p, p)) * fit.sigma2;
  fit.coef.assign(beta.data(), beta.data() + p);
  fit.se.resize(p);
  fit.cov.assign(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    fit.se[i] = std::sqrt(std::max(0.0, cov(i, i)));
    for (std::size_t j = 0; j < p; ++j) fit.cov[i * p + j] = cov(i, j);
  }
  return fit;
}

BrentResult brent_root(const std::function<double(double)>& f,
                       double lo, double hi, double tol) {
  if (lo > hi) std::swap(lo, hi);
  double fa = f(lo), fb = f(hi);
  int expansions = 0;
  while (fa * fb > 0.0) {
    if (++expansions > 60)
      throw no_bracket("brent_root: no sign change in [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "] after 60 expansions");
    // Grow the interval geometrically toward the side with the smaller |f|.
    const double width = hi - lo;
    if (std::abs(fa) < std::abs(fb)) {
      lo -= width;
      fa = f(lo);
    } else {
      hi += width;
      fb = f(hi);
    }
  }

  double a = lo, b = hi;
  double c = a, fc = fa;
  double d = b - a, e = d;
  const double eps = std::numeric_limits<double>::epsilon();
  int iter = 0;
  for (; iter < 300; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::abs(fb) <= tol || std::abs(xm) <= tol1 || fb == 0.0) break;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol1 ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0) == (fc > 0)) {
      c = a; fc = fa;
      d = b - a; e = d;
    }
  }
  return {b, fb, iter};
}

BootstrapResult bootstrap(const TrialDataset& ds,
                          const std::function<double(const TrialDataset&)>& statistic,
                          std::size_t B, std::uint64_t seed, double level,
                          bool stratify_by_arm, unsigned threads, bool skip_failed) {
  if (B == 0) throw invalid_config("bootstrap: B must be positive");
  if (level <= 0.0 || level >= 1.0) throw invalid_config("bootstrap: level in (0,1)");

  BootstrapResult out;
  out.point = statistic(ds);

  std::vector<std::size_t> control_idx, treated_idx, all_idx(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    all_idx[i] = i;
    (ds.records[i].trt == 1 ? treated_idx : control_idx).push_back(i);
  }

  out.replicates.assign(B, kNaN);
  std::mutex err_mutex;
  std::optional<std::pair<std::size_t, std::string>> failure;

  parallel_for(B, threads, [&](std::size_t r) {
    Rng rng(seed, r + 1);
    TrialDataset res;
    res.covariate_names = ds.covariate_names;
    res.n_stages = ds.n_stages;
    res.intermediate_names = ds.intermediate_names;
    res.coding = ds.coding;
    res.direction = ds.direction;
    res.records.reserve(ds.n());
    auto draw_from = [&](const std::vector<std::size_t>& pool) {
      for (std::size_t k = 0; k < pool.size(); ++k)
        res.records.push_back(ds.records[pool[rng.uniform_int(pool.size())]]);
    };
    if (stratify_by_arm) {
      draw_from(control_idx);
      draw_from(treated_idx);
    } else {
      draw_from(all_idx);
    }
    try {
      out.replicates[r] = statistic(res);
    } catch (const std::exception& ex) {
      if (!skip_failed) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!failure || r < failure->first) failure = {r, ex.what()};
      }
    }
  });

  if (failure)
    throw statistic_failed("bootstrap replicate " + std::to_string(failure->first) + ": " +
                           failure->second);

  std::vector<double> finite;
  finite.reserve(B);
  for (double v : out.replicates)
    if (std::isfinite(v)) finite.push_back(v);
  out.n_failed = B - finite.size();
  if (finite.empty()) throw statistic_failed("bootstrap: all replicates failed");

  std::sort(finite.begin(), finite.end());
  const std::size_t M = finite.size();
  const double alpha = (1.0 - level) / 2.0;
  // Order statistics: k = ceil(q*M), clamped to [1, M].  The small slack
  // keeps q*M that is an integer up to rounding (0.025*1000) from being
  // bumped to the next order statistic.
  auto order_stat = [&](double q) {
    std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(M) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, M);
    return finite[k - 1];
  };
  out.ci = {order_stat(alpha), order_stat(1.0 - alpha), level};

  double mean = 0.0;
  for (double v : finite) mean += v;
  mean /= static_cast<double>(M);
  double ss = 0.0;
  for (double v : finite) ss += (v - mean) * (v - mean);
  out.se = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1)) : 0.0;
  return out;
}

PooledEstimate rubin_pool(const std::vector<double>& estimates,
                          const std::vector<double>& variances, double level) {
  const std::size_t m = estimates.size();
  if (m == 0) throw invalid_config("rubin_pool: no estimates");
  if (variances.size() != m) throw dimension_mismatch("rubin_pool: length mismatch");

  PooledEstimate out;
  out.m = m;
  for (double e : estimates) out.point += e;
  out.point /= static_cast<double>(m);
  for (double v : variances) out.within += v;
  out.within /= static_cast<double>(m);
  if (m > 1) {
    for (double e : estimates) out.between += (e - out.point) * (e - out.point);
    out.between /= static_cast<double>(m - 1);
  }
  const double infl = 1.0 + 1.0 / static_cast<double>(m);
  out.total_var = out.within + infl * out.between;

  double q;
  if (out.between <= 0.0 || m == 1) {
    out.df = std::numeric_limits<double>::infinity();
    q = normal_quantile(1.0 - (1.0 - level) / 2.0);
  } else {
    const double ratio = out.within / (infl * out.between);
    out.df = static_cast<double>(m - 1) * (1.0 + ratio) * (1.0 + ratio);
    q = student_t_quantile(1.0 - (1.0 - level) / 2.0, out.df);
  }
  const double half = q * std::sqrt(out.total_var);
  out.ci = {out.point - half, out.point + half, level};
  return out;
}

double weighted_quantile(std::vector<double> x, std::vector<double> w, double q) {
  if (x.empty() || x.size() != w.size())
    throw dimension_mismatch("weighted_quantile: bad input sizes");
  std::vector<std::size_t> ord(x.size());
  for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  double total = 0.0;
  for (double v : w) total += v;
  if (total <= 0.0) throw degenerate_weights("weighted_quantile: non-positive weight total");

  // Hazen-style plotting positions on the cumulative weights.
  double cum = 0.0;
  double prev_p = kNaN, prev_x = kNaN;
  for (std::size_t r = 0; r < ord.size(); ++r) {
    const double wi = w[ord[r]];
    if (wi <= 0.0) continue;
    const double p = (cum + 0.5 * wi) / total;
    const double xv = x[ord[r]];
    if (q <= p) {
      if (std::isnan(prev_p)) return xv;
      return prev_x + (xv - prev_x) * (q - prev_p) / (p - prev_p);
    }
    cum += wi;
    prev_p = p;
    prev_x = xv;
  }
  return prev_x;
}

KdeResult weighted_kde(const std::vector<double>& x, const std::vector<double>& weights,
                       std::vector<double> grid) {
  const std::size_t n = x.size();
  if (n == 0) throw degenerate_support("weighted_kde: empty sample");
  std::vector<double> w = weights.empty() ? std::vector<double>(n, 1.0) : weights;
  if (w.size() != n) throw dimension_mismatch("weighted_kde: weight length mismatch");
  double total = 0.0;
  for (double v : w) {
    if (v < 0.0) throw degenerate_weights("weighted_kde: negative weight");
    total += v;
  }
  if (total <= 0.0) throw degenerate_weights("weighted_kde: zero weight total");
  for (double& v : w) v /= total;

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += w[i] * x[i];
  double var = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    var += w[i] * (x[i] - mean) * (x[i] - mean);
    sumsq += w[i] * w[i];
  }
  const double n_eff = 1.0 / sumsq;
  const double sd = std::sqrt(var * n_eff / std::max(1.0, n_eff - 1.0));
  const double iqr = weighted_quantile(x, w, 0.75) - weighted_quantile(x, w, 0.25);

  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = std::max(sd, iqr / 1.34);
  if (spread <= 0.0) throw degenerate_support("weighted_kde: zero spread sample");
  const double h = 0.9 * spread * std::pow(n_eff, -0.2);

  KdeResult out;
  out.bandwidth = h;
  out.n_eff = n_eff;
  if (grid.empty()) {
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    const double lo = *mn - 3.0 * h, hi = *mx + 3.0 * h;
    grid.resize(256);
    for (std::size_t g = 0; g < 256; ++g)
      grid[g] = lo + (hi - lo) * static_cast<double>(g) / 255.0;
  }
  out.grid = std::move(grid);
  out.density.assign(out.grid.size(), 0.0);
  const double norm = 1.0 / (h * std::sqrt(2.0 * M_PI));
  for (std::size_t g = 0; g < out.grid.size(); ++g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (out.grid[g] - x[i]) / h;
      acc += w[i] * std::exp(-0.5 * u * u);
    }
    out.density[g] = acc * norm;
  }
  return out;
}

double normal_quantile(double p) {
  boost::math::normal_distribution<double> dist;
  return boost::math::quantile(dist, p);
}

double student_t_quantile(double p, double df) {
  if (!std::isfinite(df)) return normal_quantile(p);
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::quantile(dist, p);
}

} // namespace pstrat
