#pragma once

// Cross-chain summaries: per-parameter median and credible interval, ESS
// (summed over chains), split-Rhat, and partial-correlation derived series.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phzz/diagnostics.hpp"
#include "phzz/io.hpp"

namespace phzz {

struct ParamSummary {
  std::string name;
  double median = 0.0;
  double lo = 0.0, hi = 0.0;  // credible interval bounds
  double ess = 0.0;
  double rhat = std::numeric_limits<double>::quiet_NaN();
};

struct Summary {
  std::vector<ParamSummary> params;    // R upper triangle, free D, lp
  std::vector<ParamSummary> partials;  // partial correlations P(i,j), i<j
  long draws_per_chain = 0;
  int n_chains = 0;
  double sampling_seconds = 0.0;
  double min_ess = 0.0;          // over R/D parameters
  double min_ess_partial = 0.0;  // over partial-correlation entries
  double max_rhat_partial = 0.0;
  double ci_level = 0.9;
};

namespace detail {

inline ParamSummary summarize_series(
    const std::string& name, const std::vector<std::vector<double>>& chains,
    double ci) {
  ParamSummary s;
  s.name = name;
  std::vector<double> all;
  double ess_sum = 0.0;
  for (const auto& c : chains) {
    all.insert(all.end(), c.begin(), c.end());
    ess_sum += ess(c);
  }
  s.ess = ess_sum;
  s.median = quantile(all, 0.5);
  s.lo = quantile(all, (1.0 - ci) / 2.0);
  s.hi = quantile(all, 1.0 - (1.0 - ci) / 2.0);
  if (chains.size() >= 2) s.rhat = rhat(chains);
  return s;
}

inline int q_from_r_columns(int n_r) {
  // n_r = q(q-1)/2
  int q = static_cast<int>(std::lround((1.0 + std::sqrt(1.0 + 8.0 * n_r)) / 2.0));
  if (q * (q - 1) / 2 != n_r)
    throw DataError("R column count is not a triangular number");
  return q;
}

}  // namespace detail

// All chains must share the column schema of ChainWriter.
inline Summary summarize_chains(const std::vector<ChainFile>& chains,
                                double ci = 0.9) {
  if (chains.empty()) throw DataError("no chain files");
  const std::vector<std::string>& cols = chains[0].columns;
  for (const auto& c : chains)
    if (c.columns != cols) throw DataError("chain files have mixed schemas");
  std::size_t len = chains[0].data.empty() ? 0 : chains[0].data[0].size();
  for (const auto& c : chains)
    for (const auto& col : c.data)
      if (col.size() != len) throw DataError("chain files have mixed lengths");

  std::vector<int> r_cols, d_cols;
  int lp_col = -1, sec_col = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].rfind("R.", 0) == 0) r_cols.push_back(int(i));
    else if (cols[i].rfind("D.", 0) == 0) d_cols.push_back(int(i));
    else if (cols[i] == "lp") lp_col = int(i);
    else if (cols[i] == "seconds") sec_col = int(i);
  }
  const int q = detail::q_from_r_columns(static_cast<int>(r_cols.size()));

  Summary out;
  out.ci_level = ci;
  out.n_chains = static_cast<int>(chains.size());
  out.draws_per_chain = static_cast<long>(len);
  if (sec_col >= 0)
    for (const auto& c : chains)
      for (double s : c.data[sec_col]) out.sampling_seconds += s;

  auto collect = [&](int col) {
    std::vector<std::vector<double>> per_chain;
    for (const auto& c : chains) per_chain.push_back(c.data[col]);
    return per_chain;
  };
  out.min_ess = std::numeric_limits<double>::infinity();
  for (int col : r_cols) {
    out.params.push_back(
        detail::summarize_series(cols[col], collect(col), ci));
    out.min_ess = std::min(out.min_ess, out.params.back().ess);
  }
  for (int col : d_cols) {
    out.params.push_back(
        detail::summarize_series(cols[col], collect(col), ci));
    out.min_ess = std::min(out.min_ess, out.params.back().ess);
  }
  if (lp_col >= 0)
    out.params.push_back(detail::summarize_series("lp", collect(lp_col), ci));

  // Which latent dim each D column scales; remaining dims have D = 1.
  std::vector<int> d_dim;
  for (int col : d_cols)
    d_dim.push_back(std::stoi(cols[col].substr(2)) - 1);

  // Partial correlations are recomputed per draw from Sigma = D R D.
  std::vector<std::vector<std::vector<double>>> p_series(
      q * (q - 1) / 2,
      std::vector<std::vector<double>>(chains.size()));
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t t = 0; t < len; ++t) {
      Eigen::MatrixXd R = Eigen::MatrixXd::Identity(q, q);
      int k = 0;
      for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) {
          R(i, j) = R(j, i) = chains[c].data[r_cols[k]][t];
          ++k;
        }
      Eigen::VectorXd D = Eigen::VectorXd::Ones(q);
      for (std::size_t m = 0; m < d_dim.size(); ++m)
        D[d_dim[m]] = chains[c].data[d_cols[m]][t];
      Eigen::MatrixXd P =
          partial_correlation(D.asDiagonal() * R * D.asDiagonal());
      k = 0;
      for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) p_series[k++][c].push_back(P(i, j));
    }
  }
  out.min_ess_partial = std::numeric_limits<double>::infinity();
  out.max_rhat_partial = 0.0;
  int k = 0;
  for (int i = 0; i < q; ++i)
    for (int j = i + 1; j < q; ++j) {
      std::string name =
          "P." + std::to_string(i + 1) + "." + std::to_string(j + 1);
      out.partials.push_back(
          detail::summarize_series(name, p_series[k++], ci));
      out.min_ess_partial =
          std::min(out.min_ess_partial, out.partials.back().ess);
      if (std::isfinite(out.partials.back().rhat))
        out.max_rhat_partial =
            std::max(out.max_rhat_partial, out.partials.back().rhat);
    }
  return out;
}

inline nlohmann::json summary_to_json(const Summary& s,
                                      double highlight = 0.0) {
  auto params_json = [&](const std::vector<ParamSummary>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : ps) {
      nlohmann::json j{{"name", p.name},     {"median", p.median},
                       {"lo", p.lo},         {"hi", p.hi},
                       {"ess", p.ess}};
      if (std::isfinite(p.rhat)) j["rhat"] = p.rhat;
      if (highlight > 0.0) j["highlighted"] = std::abs(p.median) > highlight;
      arr.push_back(j);
    }
    return arr;
  };
  nlohmann::json j{
      {"parameters", params_json(s.params)},
      {"partial_correlations", params_json(s.partials)},
      {"draws_per_chain", s.draws_per_chain},
      {"chains", s.n_chains},
      {"sampling_seconds", s.sampling_seconds},
      {"min_ess", s.min_ess},
      {"min_ess_partial", s.min_ess_partial},
      {"max_rhat_partial", s.max_rhat_partial},
      {"ci_level", s.ci_level},
  };
  if (s.sampling_seconds > 0.0)
    j["min_ess_per_second"] = s.min_ess / s.sampling_seconds;
  return j;
}

}  // namespace phzz
