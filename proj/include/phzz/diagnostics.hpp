#pragma once

// Chain post-processing: autocorrelation-based ESS with Geyer's initial
// monotone sequence, split potential-scale-reduction, partial correlations,
// and the squared-jumping-distance decomposition.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace phzz {

struct EssResult {
  double ess = 0.0;
  bool zero_variance = false;
};

inline EssResult ess_detail(const std::vector<double>& series) {
  const long n = static_cast<long>(series.size());
  if (n < 100) throw std::invalid_argument("ess: series too short (< 100)");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= double(n);
  auto autocov = [&](long lag) {
    double c = 0.0;
    for (long t = 0; t + lag < n; ++t)
      c += (series[t] - mean) * (series[t + lag] - mean);
    return c / double(n);
  };
  double c0 = autocov(0);
  if (c0 == 0.0) return {double(n), true};
  // Geyer: sum autocorrelations in pairs while positive, enforce a
  // non-increasing sequence of pair sums.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (long k = 0;; ++k) {
    long l1 = 2 * k, l2 = 2 * k + 1;
    if (l1 > n - 2) break;
    double pair = autocov(l1) / c0;
    if (l2 <= n - 2) pair += autocov(l2) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  // antithetic chains can give tau < 1 (reported, not clamped)
  tau = std::max(tau, 1.0 / double(n));
  return {double(n) / tau, false};
}

inline double ess(const std::vector<double>& series) {
  return ess_detail(series).ess;
}

// Split-Rhat: each chain halved, then the Gelman-Rubin statistic over the
// resulting 2m half-chains.
inline double rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("rhat: need >= 2 chains");
  std::size_t len = chains[0].size();
  for (const auto& c : chains)
    if (c.size() != len) throw std::invalid_argument("rhat: unequal lengths");
  if (len < 4) throw std::invalid_argument("rhat: chains too short (< 4)");
  std::size_t half = len / 2;
  std::vector<std::vector<double>> splits;
  for (const auto& c : chains) {
    splits.emplace_back(c.begin(), c.begin() + half);
    splits.emplace_back(c.end() - half, c.end());
  }
  const double m = double(splits.size()), n = double(half);
  std::vector<double> means;
  double grand = 0.0, w = 0.0;
  for (const auto& s : splits) {
    double mu = 0.0;
    for (double v : s) mu += v;
    mu /= n;
    means.push_back(mu);
    grand += mu / m;
    double var = 0.0;
    for (double v : s) var += (v - mu) * (v - mu);
    w += var / (n - 1.0) / m;
  }
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  if (w == 0.0) return 1.0;
  double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

// P_ij = -Omega_ij / sqrt(Omega_ii Omega_jj), Omega = Sigma^-1.
inline Eigen::MatrixXd partial_correlation(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("partial_correlation: singular input");
  Eigen::MatrixXd omega =
      llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
  Eigen::VectorXd s = omega.diagonal().cwiseSqrt();
  Eigen::MatrixXd p = -omega.cwiseQuotient(s * s.transpose());
  p.diagonal().setOnes();
  return p;
}

// Squared jumping distance of the summed squared coordinates, split into
// the marginal term T1 and the cross-covariance term T2, J = T1 + T2.
struct JumpDecomposition {
  std::vector<double> j, t1, t2;
  double mean_j = 0.0, mean_t1 = 0.0, mean_t2 = 0.0;
};

inline JumpDecomposition jump_decomposition(
    const std::vector<Eigen::VectorXd>& draws) {
  JumpDecomposition out;
  if (draws.size() < 2) return out;
  const Eigen::Index d = draws[0].size();
  for (std::size_t t = 0; t + 1 < draws.size(); ++t) {
    if (draws[t + 1].size() != d)
      throw std::invalid_argument("jump_decomposition: dimension mismatch");
    Eigen::VectorXd s =
        draws[t + 1].array().square() - draws[t].array().square();
    double sum = s.sum();
    double t1 = s.squaredNorm();
    double j = sum * sum;
    out.j.push_back(j);
    out.t1.push_back(t1);
    out.t2.push_back(j - t1);
  }
  auto mean = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / double(v.size());
  };
  out.mean_j = mean(out.j);
  out.mean_t1 = mean(out.t1);
  out.mean_t2 = mean(out.t2);
  return out;
}

inline double lag1_autocorrelation(const std::vector<double>& series) {
  const long n = static_cast<long>(series.size());
  if (n < 3) throw std::invalid_argument("lag1_autocorrelation: too short");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= double(n);
  double c0 = 0.0, c1 = 0.0;
  for (long t = 0; t < n; ++t) {
    double d = series[t] - mean;
    c0 += d * d;
    if (t + 1 < n) c1 += d * (series[t + 1] - mean);
  }
  if (c0 == 0.0) return 0.0;
  return c1 / c0;
}

inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile: empty");
  std::sort(v.begin(), v.end());
  double idx = p * double(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(idx);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = idx - double(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace phzz
