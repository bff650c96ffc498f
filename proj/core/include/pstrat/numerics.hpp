#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pstrat/data.hpp"

namespace pstrat {

// Row-major dense matrix, just enough for passing designs around the public
// API. Heavy lifting happens on Eigen maps internally.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  void append_row(const std::vector<double>& row);
};

// Worker-pool width used by operations that accept threads=0.
void set_max_threads(unsigned n);
unsigned max_threads();

// Deterministic parallel map over [0, n): identical results for any thread
// count as long as body(i) only draws randomness from streams keyed by i.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body);

struct LogisticFit {
  std::vector<double> coef;  // [intercept, slopes...]
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool ridge_used = false;
  std::vector<double> cov;   // (p+1)x(p+1) row-major inverse information

  double linear(const std::vector<double>& x) const;
  double prob(const std::vector<double>& x) const; // expit(linear)
};

// Logistic regression by iteratively reweighted least squares with step
// halving (log-likelihood never decreases). X carries covariates only; the
// intercept column is implicit. Optional non-negative case weights.
// Throws Separation when |coef| runs past 1e3, RankDeficient when the design
// has deficient column rank; a near-singular weighted Gram gets a 1e-8 ridge
// and sets ridge_used.
LogisticFit fit_logistic(const Matrix& X, const std::vector<int>& y,
                         const std::vector<double>& weights = {},
                         int max_iter = 100);

struct OlsFit {
  std::vector<double> coef;  // [intercept, slopes...]
  std::vector<double> se;
  double sigma2 = 0.0;
  std::vector<double> cov;   // coefficient covariance, row-major
  bool ridge_used = false;

  double predict(const std::vector<double>& x) const;
};

OlsFit fit_ols(const Matrix& X, const std::vector<double>& y,
               const std::vector<double>& weights = {});

struct BrentResult {
  double root = 0.0;
  double f_root = 0.0;
  int iterations = 0;
};

// Root of f on [lo, hi]; if the endpoints do not bracket, the interval grows
// geometrically (factor 2, at most 60 expansions) before NoBracket is thrown.
BrentResult brent_root(const std::function<double(double)>& f,
                       double lo, double hi, double tol = 1e-10);

struct Interval {
  double low = 0.0, high = 0.0;
  double level = 0.95;
  bool contains(double x) const { return low <= x && x <= high; }
};

struct BootstrapResult {
  double point = 0.0;
  double se = 0.0;
  Interval ci;
  std::vector<double> replicates; // in replicate order, NaN where skipped
  std::size_t n_failed = 0;
};

// Percentile bootstrap of a scalar statistic of the dataset. Resampling is
// stratified by arm unless stratify_by_arm=false. Replicate r draws from
// Rng(seed, r), so results are bit-identical for any worker count. A throwing
// statistic propagates as StatisticFailed with the replicate index, unless
// skip_failed is set (failed replicates drop out of the percentiles and are
// counted in n_failed).
BootstrapResult bootstrap(const TrialDataset& ds,
                          const std::function<double(const TrialDataset&)>& statistic,
                          std::size_t B, std::uint64_t seed,
                          double level = 0.95,
                          bool stratify_by_arm = true,
                          unsigned threads = 0,
                          bool skip_failed = false);

struct PooledEstimate {
  double point = 0.0;
  double within = 0.0;   // W
  double between = 0.0;  // B
  double total_var = 0.0; // W + (1 + 1/m) B
  double df = 0.0;       // +inf when B = 0
  Interval ci;
  std::size_t m = 0;
};

// Combine m completed-data estimates and their variances: mean point, within/
// between components, total variance W + (1+1/m)B, t interval on
// (m-1)(1 + W/((1+1/m)B))^2 degrees of freedom (normal interval when B = 0).
PooledEstimate rubin_pool(const std::vector<double>& estimates,
                          const std::vector<double>& variances,
                          double level = 0.95);

struct KdeResult {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  double n_eff = 0.0;
};

// Gaussian-kernel weighted density. Bandwidth is Silverman's rule on the
// weighted sample, 0.9 * min(sd, IQR/1.34) * n_eff^(-1/5) with
// n_eff = 1/sum(w_i^2) for normalized weights. An empty grid is replaced by
// 256 points spanning the data range +- 3 bandwidths.
KdeResult weighted_kde(const std::vector<double>& x,
                       const std::vector<double>& weights,
                       std::vector<double> grid = {});

double normal_quantile(double p);
double student_t_quantile(double p, double df);

// Weighted quantile with linear interpolation on the cumulative weights.
double weighted_quantile(std::vector<double> x, std::vector<double> w, double q);

} // namespace pstrat
